#pragma once

#include <cstddef>
#include <cstdint>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace adalog {

/// Back-reference from a cleaned log to the raw line it came from.
struct LogRef {
  std::string source_id;
  std::uint64_t line_no = 0;

  friend bool operator==(const LogRef&, const LogRef&) = default;
};

struct RawLog {
  std::string text;
  std::string source_id;
  std::uint64_t line_no = 0;

  LogRef ref() const { return {source_id, line_no}; }
};

struct CleanLog {
  std::string text;
  LogRef raw_ref;
};

struct PlaceholderWords {
  std::string path = "filepath";
  std::string number = "float";
  std::string address = "address";
};

struct NormalizationConfig {
  /// ECMAScript regular expressions, applied in order; every match is removed.
  std::vector<std::string> timestamp_patterns;
  /// ECMAScript regular expressions for network/memory addresses.
  std::vector<std::string> address_patterns;
  PlaceholderWords placeholder_words;
  bool split_compound = true;

  /// Default inventory: BGL dotted, ISO-like, syslog, epoch seconds; IPv4,
  /// MAC, hex literal and long bare-hex addresses.
  static NormalizationConfig defaults();

  /// Throws ConfigInvalid when placeholder words are not distinct lowercase
  /// single tokens or a pattern fails to compile.
  void validate() const;
};

/// Per-class substitution counts, accumulated into the cleaning report.
struct ReplacementCounts {
  std::size_t timestamps = 0;
  std::size_t paths = 0;
  std::size_t addresses = 0;
  std::size_t numbers = 0;

  ReplacementCounts& operator+=(const ReplacementCounts& other);
};

/// Compiled form of a NormalizationConfig. Immutable after construction and
/// safe to share across threads.
class Normalizer {
 public:
  explicit Normalizer(NormalizationConfig cfg = NormalizationConfig::defaults());

  const NormalizationConfig& config() const { return cfg_; }

  std::string strip_timestamps(std::string_view text, ReplacementCounts* counts = nullptr) const;
  std::string split_compound(std::string_view text) const;
  std::string replace_placeholders(std::string_view text,
                                   ReplacementCounts* counts = nullptr) const;

  /// strip_timestamps -> split_compound -> replace_placeholders, then
  /// punctuation removal, lowercasing and whitespace collapse.
  /// Throws EmptyAfterCleaning when nothing survives.
  CleanLog normalize(const RawLog& raw, ReplacementCounts* counts = nullptr) const;

 private:
  bool is_protected_token(std::string_view token) const;

  NormalizationConfig cfg_;
  std::vector<std::regex> timestamps_;
  std::vector<std::regex> addresses_;
  std::regex path_;
  std::regex number_;
};

std::string strip_timestamps(std::string_view text, const NormalizationConfig& cfg);
std::string split_compound(std::string_view text);
std::string replace_placeholders(std::string_view text, const NormalizationConfig& cfg);
CleanLog normalize(const RawLog& raw, const NormalizationConfig& cfg);

/// Collapses whitespace runs to single spaces and trims both ends.
std::string collapse_whitespace(std::string_view text);

/// Whitespace-separated tokens of a cleaned text.
std::vector<std::string> split_tokens(std::string_view text);

}  // namespace adalog
