#include "adalog/tokenize.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "adalog/digest.hpp"
#include "adalog/error.hpp"

namespace adalog {

Vocabulary::Vocabulary(std::vector<std::string> corpus_tokens) {
  id_to_token_.reserve(corpus_tokens.size() + special::kCount);
  for (auto s : {special::kPadToken, special::kUnkToken, special::kMaskToken, special::kClsToken}) {
    id_to_token_.emplace_back(s);
  }
  for (auto& t : corpus_tokens) id_to_token_.push_back(std::move(t));
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    const auto& tok = id_to_token_[i];
    if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos) {
      throw Error(ErrorKind::FormatError, "vocabulary token " + std::to_string(i) +
                                              " is empty or contains whitespace");
    }
    if (!token_to_id_.emplace(tok, static_cast<TokenId>(i)).second) {
      throw Error(ErrorKind::FormatError, "duplicate vocabulary token '" + tok + "'");
    }
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? special::kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.contains(std::string(token));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw Error(ErrorKind::UnknownId, "token id " + std::to_string(id) + " outside vocabulary of " +
                                          std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : id_to_token_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.size() < special::kCount) {
    throw Error(ErrorKind::FormatError, "vocabulary file shorter than the special-token header");
  }
  const std::string_view expected[] = {special::kPadToken, special::kUnkToken, special::kMaskToken,
                                       special::kClsToken};
  for (std::size_t i = 0; i < special::kCount; ++i) {
    if (lines[i] != expected[i]) {
      throw Error(ErrorKind::FormatError, "vocabulary line " + std::to_string(i) + " must be " +
                                              std::string(expected[i]));
    }
  }
  return Vocabulary(std::vector<std::string>(lines.begin() + special::kCount, lines.end()));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::MissingInput, "cannot write " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot read vocabulary " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string Vocabulary::digest() const { return sha256_hex(serialize()); }

Vocabulary build_vocab(std::span<const CleanLog> corpus, std::size_t min_freq,
                       std::size_t max_size) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot build a vocabulary from nothing");
  if (min_freq < 1) throw Error(ErrorKind::InvalidArgument, "min_freq must be >= 1");
  if (max_size < special::kCount + 1) {
    throw Error(ErrorKind::InvalidArgument, "max_size must leave room for one corpus token");
  }
  std::map<std::string, std::size_t> freq;
  for (const auto& log : corpus) {
    for (auto& tok : split_tokens(log.text)) ++freq[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : freq) {
    const bool collides =
        tok == special::kPadToken || tok == special::kUnkToken || tok == special::kMaskToken ||
        tok == special::kClsToken;
    if (n >= min_freq && !collides) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - special::kCount);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
  return Vocabulary(std::move(tokens));
}

TokenSequence encode(const CleanLog& log, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 2) throw Error(ErrorKind::InvalidArgument, "max_len must be >= 2");
  const auto tokens = split_tokens(log.text);
  if (tokens.empty()) {
    throw Error(ErrorKind::EmptyAfterCleaning,
                log.raw_ref.source_id + ":" + std::to_string(log.raw_ref.line_no) + " has no tokens");
  }
  TokenSequence seq;
  seq.raw_ref = log.raw_ref;
  seq.length = std::min(tokens.size(), max_len);
  seq.truncated = tokens.size() > max_len;
  seq.ids.assign(max_len, special::kPad);
  for (std::size_t i = 0; i < seq.length; ++i) seq.ids[i] = vocab.id(tokens[i]);
  return seq;
}

std::vector<TokenSequence> encode_all(std::span<const CleanLog> logs, const Vocabulary& vocab,
                                      std::size_t max_len) {
  std::vector<TokenSequence> out;
  out.reserve(logs.size());
  for (const auto& log : logs) out.push_back(encode(log, vocab, max_len));
  return out;
}

std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    const auto& tok = vocab.token(id);
    if (id != special::kPad) out.push_back(tok);
  }
  return out;
}

}  // namespace adalog
