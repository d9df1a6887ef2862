#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace adalog {

enum class Label { Normal = 0, Anomalous = 1 };

std::string_view to_string(Label label);
/// Accepts 0/1 and normal/anomalous. Throws FormatError.
Label parse_label(std::string_view text);

struct MetricsReport {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when a denominator vanished and the statistic was defined as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  // Warning: the truth labels contained no anomaly.
  bool no_anomalies_in_truth = false;

  std::size_t total() const { return tp + fp + fn + tn; }
  std::size_t predicted_positive() const { return tp + fp; }
};

/// Throws LengthMismatch.
MetricsReport confusion_metrics(std::span<const Label> predicted, std::span<const Label> truth);

/// Recomputes precision, recall, f1 and the flags from the counts.
MetricsReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

}  // namespace adalog
