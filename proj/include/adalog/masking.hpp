#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "adalog/model.hpp"
#include "adalog/tokenize.hpp"

namespace adalog {

enum class MaskKind { RandomFraction, TokenByToken };

struct MaskingStrategy {
  MaskKind kind = MaskKind::RandomFraction;
  double fraction = 0.15;  // only meaningful for RandomFraction

  static MaskingStrategy random(double fraction);
  static MaskingStrategy token_by_token();

  /// "token" or "random:<fraction>".
  std::string descriptor() const;
  /// Accepts descriptor() output plus the shorthands "token", "random"
  /// (fraction 0.15) and a bare fraction such as "0.25".
  static MaskingStrategy parse(std::string_view text);

  void validate() const;

  friend bool operator==(const MaskingStrategy&, const MaskingStrategy&) = default;
};

struct MaskPlan {
  std::vector<std::size_t> masked_indices;  // ascending
  std::vector<TokenId> original_ids;        // ids at masked_indices in the source
  TokenSequence masked_sequence;            // MASK at masked_indices, source elsewhere

  MaskedTargets targets() const { return {masked_indices, original_ids}; }
};

/// |M| = max(1, round(fraction * length)), clamped to length.
std::size_t masked_count(std::size_t length, double fraction);

/// Uniform draw of masked_count positions without replacement; deterministic
/// in rng_seed on every platform.
MaskPlan plan_random(const TokenSequence& seq, double fraction, std::uint64_t rng_seed);

/// One plan per content position, plan k masking only position k.
std::vector<MaskPlan> plan_token_by_token(const TokenSequence& seq);

/// Plan from an explicit index set (shared by both strategies).
MaskPlan plan_from_indices(const TokenSequence& seq, std::vector<std::size_t> indices);

}  // namespace adalog
