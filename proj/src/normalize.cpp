#include "adalog/normalize.hpp"

#include <algorithm>
#include <cctype>
#include <iterator>
#include <set>

#include "adalog/error.hpp"

namespace adalog {
namespace {

constexpr auto kRegexFlags = std::regex::ECMAScript | std::regex::optimize;

// Leading group keeps the delimiter that precedes a path so it survives replacement.
constexpr const char* kPathPattern =
    R"((^|[\s=:,;(\[{<"'])((?:[A-Za-z]:)?(?:~|\.{1,2})?(?:/[^\s/,;:)\]}>"'=]+)+/?))";
constexpr const char* kNumberPattern = R"(\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)";

bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::regex compile(const std::string& pattern, std::string_view what) {
  try {
    return std::regex(pattern, kRegexFlags);
  } catch (const std::regex_error& e) {
    throw Error(ErrorKind::ConfigInvalid,
                std::string(what) + " pattern does not compile: " + pattern + " (" + e.what() + ")");
  }
}

std::size_t count_matches(const std::string& text, const std::regex& re) {
  return static_cast<std::size_t>(
      std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

bool is_placeholder_word(const std::string& w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), is_ascii_lower);
}

}  // namespace

ReplacementCounts& ReplacementCounts::operator+=(const ReplacementCounts& other) {
  timestamps += other.timestamps;
  paths += other.paths;
  addresses += other.addresses;
  numbers += other.numbers;
  return *this;
}

NormalizationConfig NormalizationConfig::defaults() {
  NormalizationConfig cfg;
  cfg.timestamp_patterns = {
      // BGL dotted: 2005-06-09-14.53.14.219998
      R"(\b\d{4}-\d{2}-\d{2}-\d{2}\.\d{2}\.\d{2}\.\d+\b)",
      // ISO-like: 2005-06-09T14:53:14.219Z, 2005-06-09 14:53:14,219+01:00
      R"(\b\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?:Z|[+-]\d{2}:?\d{2})?\b)",
      // syslog: Jun  9 14:53:14
      R"(\b(?:Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec)\s+\d{1,2}\s+\d{2}:\d{2}:\d{2}\b)",
      // bare dates: 2005.06.09, 2005-06-09, 2005/06/09
      R"(\b\d{4}[-/.]\d{2}[-/.]\d{2}\b)",
      // time of day, not part of a colon-separated run (MAC addresses)
      R"((?:^|[^:\w.])\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?![:\w]))",
      // epoch seconds: 1117838570, 1117838570.123
      R"(\b\d{10}(?:\.\d+)?\b)",
  };
  cfg.address_patterns = {
      // IPv4 with optional port
      R"(\b\d{1,3}(?:\.\d{1,3}){3}(?::\d{1,5})?\b)",
      // MAC-like
      R"(\b[0-9A-Fa-f]{2}(?:[:-][0-9A-Fa-f]{2}){5}\b)",
      // hex literal
      R"(\b0[xX][0-9A-Fa-f]+\b)",
      // long bare hex mixing digits and letters (memory words)
      R"(\b(?=[0-9A-Fa-f]*[0-9])(?=[0-9A-Fa-f]*[A-Fa-f])[0-9A-Fa-f]{8,}\b)",
  };
  return cfg;
}

void NormalizationConfig::validate() const {
  const auto& w = placeholder_words;
  for (const auto* word : {&w.path, &w.number, &w.address}) {
    if (!is_placeholder_word(*word)) {
      throw Error(ErrorKind::ConfigInvalid,
                  "placeholder word '" + *word + "' must be a lowercase single token");
    }
  }
  if (w.path == w.number || w.path == w.address || w.number == w.address) {
    throw Error(ErrorKind::ConfigInvalid, "placeholder words must be distinct");
  }
  for (const auto& p : timestamp_patterns) compile(p, "timestamp");
  for (const auto& p : address_patterns) compile(p, "address");
}

Normalizer::Normalizer(NormalizationConfig cfg)
    : cfg_(std::move(cfg)),
      path_(compile(kPathPattern, "path")),
      number_(compile(kNumberPattern, "number")) {
  cfg_.validate();
  for (const auto& p : cfg_.timestamp_patterns) timestamps_.push_back(compile(p, "timestamp"));
  for (const auto& p : cfg_.address_patterns) addresses_.push_back(compile(p, "address"));
}

std::string Normalizer::strip_timestamps(std::string_view text, ReplacementCounts* counts) const {
  std::string s(text);
  for (const auto& re : timestamps_) {
    if (counts) counts->timestamps += count_matches(s, re);
    s = std::regex_replace(s, re, " ");
  }
  return collapse_whitespace(s);
}

bool Normalizer::is_protected_token(std::string_view token) const {
  if (token.find('/') != std::string_view::npos) return true;
  const std::string t(token);
  return std::any_of(addresses_.begin(), addresses_.end(),
                     [&](const std::regex& re) { return std::regex_search(t, re); });
}

std::string Normalizer::split_compound(std::string_view text) const {
  std::string out;
  out.reserve(text.size() + text.size() / 4);
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;
    const std::string_view tok = text.substr(i, end - i);
    if (is_protected_token(tok)) {
      out.append(tok);
    } else {
      out.push_back(tok[0]);
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const char prev = tok[k - 1];
        const char c = tok[k];
        const bool upper_run_end = is_ascii_upper(prev) && is_ascii_upper(c) &&
                                   k + 1 < tok.size() && is_ascii_lower(tok[k + 1]);
        const bool case_rise = (is_ascii_lower(prev) || is_ascii_digit(prev)) && is_ascii_upper(c);
        if (upper_run_end || case_rise) out.push_back(' ');
        out.push_back(c);
      }
    }
    i = end;
  }
  return out;
}

std::string Normalizer::replace_placeholders(std::string_view text,
                                             ReplacementCounts* counts) const {
  const auto& words = cfg_.placeholder_words;
  std::string s(text);
  if (counts) counts->paths += count_matches(s, path_);
  s = std::regex_replace(s, path_, "$1 " + words.path + " ");
  for (const auto& re : addresses_) {
    if (counts) counts->addresses += count_matches(s, re);
    s = std::regex_replace(s, re, " " + words.address + " ");
  }
  if (counts) counts->numbers += count_matches(s, number_);
  s = std::regex_replace(s, number_, " " + words.number + " ");
  return collapse_whitespace(s);
}

CleanLog Normalizer::normalize(const RawLog& raw, ReplacementCounts* counts) const {
  std::string s = strip_timestamps(raw.text, counts);
  if (cfg_.split_compound) s = split_compound(s);
  s = replace_placeholders(s, counts);
  for (char& c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && (std::ispunct(u) || std::iscntrl(u))) {
      c = ' ';
    } else if (is_ascii_upper(c)) {
      c = static_cast<char>(c - 'A' + 'a');
    }
  }
  s = collapse_whitespace(s);
  if (s.empty()) {
    throw Error(ErrorKind::EmptyAfterCleaning,
                raw.source_id + ":" + std::to_string(raw.line_no) + " is empty after cleaning");
  }
  return CleanLog{std::move(s), raw.ref()};
}

std::string strip_timestamps(std::string_view text, const NormalizationConfig& cfg) {
  return Normalizer(cfg).strip_timestamps(text);
}

std::string split_compound(std::string_view text) {
  return Normalizer().split_compound(text);
}

std::string replace_placeholders(std::string_view text, const NormalizationConfig& cfg) {
  return Normalizer(cfg).replace_placeholders(text);
}

CleanLog normalize(const RawLog& raw, const NormalizationConfig& cfg) {
  return Normalizer(cfg).normalize(raw);
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;
    if (end > i) tokens.emplace_back(text.substr(i, end - i));
    i = end;
  }
  return tokens;
}

}  // namespace adalog
