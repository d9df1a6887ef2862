#include "adalog/masking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "adalog/error.hpp"
#include "adalog/rng.hpp"

namespace adalog {

MaskingStrategy MaskingStrategy::random(double fraction) {
  MaskingStrategy s{MaskKind::RandomFraction, fraction};
  s.validate();
  return s;
}

MaskingStrategy MaskingStrategy::token_by_token() { return {MaskKind::TokenByToken, 1.0}; }

std::string MaskingStrategy::descriptor() const {
  if (kind == MaskKind::TokenByToken) return "token";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, fraction);
  (void)ec;
  return "random:" + std::string(buf, end);
}

MaskingStrategy MaskingStrategy::parse(std::string_view text) {
  if (text == "token" || text == "token_by_token") return token_by_token();
  if (text == "random") return random(0.15);
  std::string_view number = text;
  if (text.starts_with("random:")) number = text.substr(7);
  double f = 0.0;
  auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), f);
  if (ec != std::errc() || ptr != number.data() + number.size()) {
    throw Error(ErrorKind::ConfigInvalid, "unrecognized masking strategy '" + std::string(text) + "'");
  }
  return random(f);
}

void MaskingStrategy::validate() const {
  if (kind == MaskKind::RandomFraction && !(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorKind::ConfigInvalid, "mask fraction must lie in (0, 1]");
  }
}

std::size_t masked_count(std::size_t length, double fraction) {
  if (length == 0) return 0;
  const auto rounded = std::llround(fraction * static_cast<double>(length));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max<long long>(1, rounded)), 1,
                                 length);
}

MaskPlan plan_from_indices(const TokenSequence& seq, std::vector<std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorKind::InvalidArgument, "a mask plan needs one position");
  std::sort(indices.begin(), indices.end());
  MaskPlan plan;
  plan.masked_sequence = seq;
  for (std::size_t idx : indices) {
    if (idx >= seq.length) {
      throw Error(ErrorKind::InvalidArgument, "mask position outside sequence content");
    }
    plan.original_ids.push_back(seq.ids[idx]);
    plan.masked_sequence.ids[idx] = special::kMask;
  }
  plan.masked_indices = std::move(indices);
  return plan;
}

MaskPlan plan_random(const TokenSequence& seq, double fraction, std::uint64_t rng_seed) {
  if (seq.length < 1) throw Error(ErrorKind::InvalidArgument, "cannot mask an empty sequence");
  MaskingStrategy::random(fraction);
  const std::size_t k = masked_count(seq.length, fraction);
  std::vector<std::size_t> pool(seq.length);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(rng_seed);
  // partial Fisher-Yates: the first k slots are a uniform k-subset
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(seq.length - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return plan_from_indices(seq, std::move(pool));
}

std::vector<MaskPlan> plan_token_by_token(const TokenSequence& seq) {
  if (seq.length < 1) throw Error(ErrorKind::InvalidArgument, "cannot mask an empty sequence");
  std::vector<MaskPlan> plans;
  plans.reserve(seq.length);
  for (std::size_t i = 0; i < seq.length; ++i) plans.push_back(plan_from_indices(seq, {i}));
  return plans;
}

}  // namespace adalog
