#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adalog/normalize.hpp"

namespace adalog {

using TokenId = std::int32_t;

namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kMask = 2;
inline constexpr TokenId kCls = 3;
inline constexpr TokenId kCount = 4;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::string_view kClsToken = "[CLS]";
}  // namespace special

class Vocabulary {
 public:
  /// Builds from corpus tokens in id order; specials are prepended.
  explicit Vocabulary(std::vector<std::string> corpus_tokens);

  std::size_t size() const { return id_to_token_.size(); }

  /// UNK for out-of-vocabulary tokens.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;

  /// Throws UnknownId for ids outside [0, size).
  const std::string& token(TokenId id) const;

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// One token per line, line number = id.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  /// SHA-256 of serialize().
  std::string digest() const;

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

/// Tokens with frequency >= min_freq, most frequent first (ties broken
/// lexicographically), truncated to max_size - 4, plus the specials.
Vocabulary build_vocab(std::span<const CleanLog> corpus, std::size_t min_freq,
                       std::size_t max_size = 4096);

struct TokenSequence {
  std::vector<TokenId> ids;  // padded to max_len
  std::size_t length = 0;    // non-PAD prefix
  LogRef raw_ref;
  bool truncated = false;

  std::span<const TokenId> content() const { return {ids.data(), length}; }
};

inline constexpr std::size_t kDefaultMaxLen = 128;

/// Whitespace-split, OOV -> UNK, truncated to max_len, right-padded with PAD.
/// Throws EmptyAfterCleaning for a log without tokens.
TokenSequence encode(const CleanLog& log, const Vocabulary& vocab,
                     std::size_t max_len = kDefaultMaxLen);

std::vector<TokenSequence> encode_all(std::span<const CleanLog> logs, const Vocabulary& vocab,
                                      std::size_t max_len = kDefaultMaxLen);

/// Inverse mapping with PAD positions omitted. Throws UnknownId.
std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace adalog
