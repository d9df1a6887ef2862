#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adalog/masking.hpp"
#include "adalog/metrics.hpp"

namespace adalog {

struct Threshold {
  double value = 0.0;
  double percentile = 90.0;
  std::size_t n_calibration = 0;
  std::string checkpoint_hash;
  std::string vocab_hash;
  MaskingStrategy strategy;
  std::size_t repeats = 1;
};

/// Linear interpolation between closest order statistics: with sorted x and
/// h = (n - 1) * percentile / 100, T = x[floor h] + frac(h) * (x[floor h + 1] - x[floor h]).
/// Throws EmptyScores, NonFiniteScore, InvalidArgument.
double quantile(std::span<const double> scores, double percentile);

/// Threshold over normal-log scores; digests and strategy are left for the caller.
Threshold select_threshold(std::span<const double> scores, double percentile = 90.0);

struct SweepRow {
  double percentile = 0.0;
  double threshold = 0.0;
  MetricsReport metrics;
};

/// One row per percentile; thresholds come from scores_normal only.
std::vector<SweepRow> sweep(std::span<const double> scores_normal,
                            std::span<const double> percentiles,
                            std::span<const std::pair<double, Label>> labeled_test_scores);

std::string threshold_to_json(const Threshold& t);
Threshold threshold_from_json(std::string_view text);

/// Tab-separated: percentile, threshold, tp, fp, fn, tn, precision, recall, f1.
std::string format_sweep(std::span<const SweepRow> rows);

}  // namespace adalog
