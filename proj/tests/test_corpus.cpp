#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "adalog/corpus.hpp"
#include "adalog/error.hpp"
#include "adalog/io.hpp"

using namespace adalog;

namespace {

std::vector<CleanLog> texts(std::initializer_list<const char*> xs) {
  std::vector<CleanLog> out;
  std::uint64_t line = 1;
  for (const char* x : xs) out.push_back({x, {"t", line++}});
  return out;
}

std::vector<CleanLog> numbered(std::size_t n) {
  std::vector<CleanLog> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"log " + std::to_string(i), {"t", i + 1}});
  return out;
}

struct Cleaned {
  std::vector<CleanLog> normal, anomalous;
};

Cleaned clean_synth(const LabeledCorpus& c) {
  const Normalizer n;
  Cleaned out;
  for (std::size_t i = 0; i < c.logs.size(); ++i) {
    (c.labels[i] == Label::Normal ? out.normal : out.anomalous).push_back(n.normalize(c.logs[i]));
  }
  return out;
}

std::set<std::string> vocabulary(const std::vector<CleanLog>& logs) {
  std::set<std::string> v;
  for (const auto& l : logs)
    for (auto& t : split_tokens(l.text)) v.insert(t);
  return v;
}

}  // namespace

TEST(Corpus, DedupeKeepsFirstAndCounts) {
  const auto r = dedupe(texts({"a b", "a b", "c"}));
  ASSERT_EQ(r.unique.size(), 2u);
  EXPECT_EQ(r.unique[0].text, "a b");
  EXPECT_EQ(r.unique[0].raw_ref.line_no, 1u);
  EXPECT_EQ(r.unique[1].text, "c");
  EXPECT_EQ(r.multiplicity, (std::vector<std::size_t>{2, 1}));
  const auto again = dedupe(r.unique);
  EXPECT_EQ(again.unique.size(), 2u);
  EXPECT_EQ(again.multiplicity, (std::vector<std::size_t>{1, 1}));
}

TEST(Corpus, DedupeMatchesCountingOracle) {
  const auto c = clean_synth(synthesize({20, 3000, 0, 5}));
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& l : c.normal) ++counts[l.text];
  const auto r = dedupe(c.normal);
  ASSERT_EQ(r.unique.size(), counts.size());
  for (std::size_t i = 0; i < r.unique.size(); ++i) EXPECT_EQ(r.multiplicity[i], counts[r.unique[i].text]);
}

TEST(Corpus, SplitSizesAndDeterminism) {
  const auto normals = numbered(100);
  const auto anomalies = texts({"bad one", "bad two"});
  const auto s = split(normals, anomalies, 3);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.validation.size(), 15u);
  EXPECT_EQ(s.test.size(), 17u);
  EXPECT_EQ(std::count(s.test_labels.begin(), s.test_labels.end(), Label::Anomalous), 2);
  EXPECT_EQ(s.test.back().text, "bad two");
  const auto again = split(normals, anomalies, 3);
  for (std::size_t i = 0; i < s.train.size(); ++i) EXPECT_EQ(again.train[i].text, s.train[i].text);
  const auto other = split(normals, anomalies, 4);
  bool differs = false;
  for (std::size_t i = 0; i < s.train.size(); ++i) differs |= other.train[i].text != s.train[i].text;
  EXPECT_TRUE(differs);
}

TEST(Corpus, SplitRatiosWithinOne) {
  for (std::size_t n = 10; n < 400; n += 7) {
    const auto s = split(numbered(n), {}, n);
    EXPECT_NEAR(double(s.train.size()), 0.70 * n, 1.0) << n;
    EXPECT_NEAR(double(s.validation.size()), 0.15 * n, 1.0) << n;
    EXPECT_NEAR(double(s.test.size()), 0.15 * n, 1.0) << n;
    EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), n);
  }
}

TEST(Corpus, SplitPartitionsAreDisjoint) {
  const auto c = clean_synth(synthesize({50, 5000, 200, 7}));
  const auto s = split(dedupe(c.normal).unique, dedupe(c.anomalous).unique, 7);
  std::unordered_set<std::string> train, val;
  for (const auto& l : s.train) train.insert(l.text);
  for (const auto& l : s.validation) {
    EXPECT_FALSE(train.contains(l.text));
    val.insert(l.text);
  }
  for (std::size_t i = 0; i < s.test.size(); ++i) {
    EXPECT_FALSE(train.contains(s.test[i].text)) << s.test[i].text;
    EXPECT_FALSE(val.contains(s.test[i].text)) << s.test[i].text;
  }
}

TEST(Corpus, TooFewLogs) {
  try {
    split(numbered(9), {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewLogs);
  }
}

TEST(Corpus, SynthLabelCountsAndDeterminism) {
  const SynthConfig cfg{12, 300, 40, 9};
  const auto a = synthesize(cfg);
  EXPECT_EQ(a.logs.size(), 340u);
  EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), Label::Normal), 300);
  EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), Label::Anomalous), 40);
  const auto b = synthesize(cfg);
  for (std::size_t i = 0; i < a.logs.size(); ++i) EXPECT_EQ(a.logs[i].text, b.logs[i].text);
  EXPECT_EQ(a.logs[5].line_no, 6u);
  EXPECT_THROW(synthesize({1, 10, 1, 0}), Error);
}

TEST(Corpus, AnomaliesNeverEqualNormals) {
  const SynthConfig cfg{50, 5000, 200, 7};
  const auto t = synth_templates(cfg);
  EXPECT_EQ(t.normal.size(), 50u);
  EXPECT_EQ(t.anomalous.size(), 10u);
  for (const auto& a : t.anomalous)
    EXPECT_EQ(std::count(t.normal.begin(), t.normal.end(), a), 0) << a;

  const auto c = clean_synth(synthesize(cfg));
  std::unordered_set<std::string> normal;
  for (const auto& l : c.normal) normal.insert(l.text);
  for (const auto& l : c.anomalous) EXPECT_FALSE(normal.contains(l.text)) << l.text;
}

TEST(Corpus, AnomalyTemplateVocabularyMostlyForeign) {
  // Words of the unseen anomaly templates, normalized, against the vocabulary
  // the emitted normal logs actually use.
  const SynthConfig cfg{50, 5000, 200, 7};
  const auto c = clean_synth(synthesize(cfg));
  const auto vn = vocabulary(c.normal);
  std::set<std::string> va;
  for (auto text : synth_templates(cfg).anomalous) {
    for (char& ch : text)
      if (ch == '{' || ch == '}' || ch == '|' || ch == '<' || ch == '>') ch = ' ';
    for (auto& tok : split_tokens(Normalizer().normalize({text, "t", 1}).text)) {
      if (tok != "number" && tok != "path" && tok != "address") va.insert(tok);
    }
  }
  std::size_t shared = 0;
  for (const auto& tok : va) shared += vn.contains(tok);
  EXPECT_LT(double(shared) / double(va.size()), 0.5) << shared << " of " << va.size();
}

TEST(Corpus, OovBaselineIsNotPerfect) {
  const auto c = clean_synth(synthesize({50, 5000, 200, 7}));
  const auto s = split(dedupe(c.normal).unique, dedupe(c.anomalous).unique, 7);
  const auto seen = vocabulary(s.train);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < s.test.size(); ++i) {
    bool flagged = false;
    for (const auto& t : split_tokens(s.test[i].text)) flagged |= !seen.contains(t);
    const bool anomalous = s.test_labels[i] == Label::Anomalous;
    tp += flagged && anomalous;
    fp += flagged && !anomalous;
    fn += !flagged && anomalous;
  }
  const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
  EXPECT_LT(f1, 1.0);
  EXPECT_GT(fn, 0u);  // in-vocabulary anomalies exist
}

TEST(Corpus, FreshNormalsShareTemplates) {
  const SynthConfig cfg{20, 2000, 0, 3};
  const auto base = clean_synth(synthesize(cfg));
  const Normalizer n;
  const auto fresh = synthesize_normals(cfg, 500, 1);
  EXPECT_EQ(fresh.size(), 500u);
  const auto vn = vocabulary(base.normal);
  std::size_t unseen = 0;
  for (const auto& raw : fresh)
    for (auto& t : split_tokens(n.normalize(raw).text)) unseen += !vn.contains(t);
  EXPECT_EQ(unseen, 0u);
  EXPECT_NE(synthesize_normals(cfg, 5, 1)[0].text, synthesize_normals(cfg, 5, 2)[0].text);
}

TEST(Corpus, FileFormatsRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "adalog_corpus_test";
  std::filesystem::remove_all(dir);
  const auto synth = synthesize({5, 20, 4, 1});
  write_file(dir / "inline.tsv", format_inline(synth));
  const auto back = load_inline(dir / "inline.tsv");
  ASSERT_EQ(back.logs.size(), synth.logs.size());
  for (std::size_t i = 0; i < back.logs.size(); ++i) {
    EXPECT_EQ(back.logs[i].text, synth.logs[i].text);
    EXPECT_EQ(back.labels[i], synth.labels[i]);
  }
  write_file(dir / "logs.txt", "one\ntwo\n");
  write_file(dir / "labels.txt", "0\n1\n");
  const auto par = load_parallel(dir / "logs.txt", dir / "labels.txt");
  EXPECT_EQ(par.labels[1], Label::Anomalous);
  EXPECT_EQ(par.logs[1].line_no, 2u);
  write_file(dir / "labels.txt", "0\n");
  EXPECT_THROW(load_parallel(dir / "logs.txt", dir / "labels.txt"), Error);

  const auto s = split(numbered(20), texts({"bad"}), 1);
  save_split(s, dir / "split");
  const auto loaded = load_split(dir / "split");
  EXPECT_EQ(loaded.train.size(), s.train.size());
  EXPECT_EQ(loaded.test_labels, s.test_labels);
  EXPECT_EQ(loaded.test.back().text, "bad");
  EXPECT_EQ(loaded.test.back().raw_ref, s.test.back().raw_ref);
  EXPECT_THROW(parse_clean("a\tb\n"), Error);
  EXPECT_THROW(load_raw(dir / "missing.txt"), Error);
  std::filesystem::remove_all(dir);
}
