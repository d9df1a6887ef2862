#include <gtest/gtest.h>

#include <cctype>

#include "adalog/error.hpp"
#include "adalog/io.hpp"
#include "adalog/normalize.hpp"

using namespace adalog;

namespace {

std::string clean(const std::string& text) {
  static const Normalizer n;
  return n.normalize(RawLog{text, "t", 1}).text;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(Normalize, GoldenFileIsByteExact) {
  const auto inputs = read_lines(std::string(ADALOG_GOLDEN_DIR) + "/normalize_input.txt");
  const auto expected = read_lines(std::string(ADALOG_GOLDEN_DIR) + "/normalize_expected.txt");
  ASSERT_EQ(inputs.size(), expected.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::string got;
    try {
      got = clean(inputs[i]);
    } catch (const Error& e) {
      got = "<" + std::string(to_string(e.kind())) + ">";
    }
    EXPECT_EQ(got, expected[i]) << "line " << i + 1 << ": " << inputs[i];
  }
}

TEST(Normalize, WorkedExamples) {
  EXPECT_EQ(clean("2005-06-09-14.53.14.219998 RASKernelInfo 3.2143"), "ras kernel info float");
  EXPECT_EQ(clean("read 3.2143 from /var/log/sys.d"), "read float from filepath");
  EXPECT_EQ(clean("conn 10.0.0.1 buf 0x00ffee count 42"), "conn address buf address count float");
  EXPECT_EQ(clean("a   ...  b ,,, c"), "a b c");
}

TEST(Normalize, TimestampOnlyLineIsEmpty) {
  EXPECT_EQ(kind_of([] { clean("2005-06-09-14.53.14.219998"); }), ErrorKind::EmptyAfterCleaning);
  EXPECT_EQ(kind_of([] { clean("  ,;: "); }), ErrorKind::EmptyAfterCleaning);
}

TEST(Normalize, StripTimestampsLeavesTheRest) {
  const Normalizer n;
  EXPECT_EQ(n.strip_timestamps("2005-06-09-14.53.14.219998 R27 kernel info"), "R27 kernel info");
  EXPECT_EQ(n.strip_timestamps("Jun  9 14:53:14 host up"), "host up");
  EXPECT_EQ(n.strip_timestamps("at 1117838570 done"), "at done");
}

TEST(Normalize, SplitCompoundCases) {
  EXPECT_EQ(split_compound("RASKernelInfo"), "RAS Kernel Info");
  EXPECT_EQ(split_compound("getHTTPResponse"), "get HTTP Response");
  EXPECT_EQ(split_compound("lowercase"), "lowercase");
  EXPECT_EQ(split_compound("/usr/LocalBin"), "/usr/LocalBin");
}

TEST(Normalize, PathWithDigitsIsOnePlaceholder) {
  EXPECT_EQ(clean("open /data/node17/part-00042.log failed"), "open filepath failed");
}

TEST(Normalize, CountsReplacements) {
  const Normalizer n;
  ReplacementCounts c;
  n.normalize(RawLog{"2005-06-09-14.53.14.219998 read 7 from /a/b at 10.0.0.1", "t", 1}, &c);
  EXPECT_EQ(c.timestamps, 1u);
  EXPECT_EQ(c.paths, 1u);
  EXPECT_EQ(c.addresses, 1u);
  EXPECT_EQ(c.numbers, 1u);
}

TEST(Normalize, PlaceholderWordsMustBeDistinctLowercase) {
  auto cfg = NormalizationConfig::defaults();
  cfg.placeholder_words.number = "filepath";
  EXPECT_EQ(kind_of([&] { Normalizer{cfg}; }), ErrorKind::ConfigInvalid);
  cfg = NormalizationConfig::defaults();
  cfg.placeholder_words.address = "Addr";
  EXPECT_EQ(kind_of([&] { Normalizer{cfg}; }), ErrorKind::ConfigInvalid);
  cfg = NormalizationConfig::defaults();
  cfg.timestamp_patterns.push_back("([");
  EXPECT_EQ(kind_of([&] { Normalizer{cfg}; }), ErrorKind::ConfigInvalid);
}

TEST(Normalize, CustomPlaceholderWords) {
  auto cfg = NormalizationConfig::defaults();
  cfg.placeholder_words = {"path", "num", "addr"};
  EXPECT_EQ(normalize(RawLog{"read 3 from /x/y at 0xff", "t", 1}, cfg).text,
            "read num from path at addr");
}

// Properties over a spread of generated raw lines.
class NormalizeProperty : public ::testing::TestWithParam<int> {};

TEST_P(NormalizeProperty, IdempotentDigitFreeLowercase) {
  const char* words[] = {"RASKernel", "node-17", "/var/log/x1.log", "3.25", "0xdead", "ERROR:",
                         "192.168.0.4:80", "Jun  3 10:11:12", "ciod", "FailedLogin", "(x,y)", "42"};
  std::string line;
  unsigned state = static_cast<unsigned>(GetParam()) * 2654435761u + 1;
  for (int i = 0; i < 8; ++i) {
    state = state * 1103515245u + 12345u;
    line += std::string(words[(state >> 16) % 12]) + " ";
  }
  std::string once;
  try {
    once = clean(line);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyAfterCleaning);
    return;
  }
  EXPECT_EQ(clean(once), once) << line;
  for (char c : once) {
    EXPECT_FALSE(std::isdigit(static_cast<unsigned char>(c))) << once;
    EXPECT_FALSE(std::isupper(static_cast<unsigned char>(c))) << once;
    EXPECT_FALSE(std::ispunct(static_cast<unsigned char>(c))) << once;
  }
  EXPECT_EQ(collapse_whitespace(once), once);
}

INSTANTIATE_TEST_SUITE_P(Generated, NormalizeProperty, ::testing::Range(0, 200));
