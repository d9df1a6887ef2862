#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adalog/calibrate.hpp"
#include "adalog/corpus.hpp"
#include "adalog/metrics.hpp"
#include "adalog/score.hpp"

namespace adalog {

struct Verdict {
  LogRef raw_ref;
  double score = 0.0;
  double threshold_value = 0.0;
  Label label = Label::Normal;
};

/// Anomalous iff score > T. Throws CheckpointMismatch.
Verdict classify(const ScoreReport& report, const Threshold& t);
Verdict classify(const LogRef& ref, double score, const Threshold& t);

/// Throws LengthMismatch. A truth vector without anomalies sets
/// no_anomalies_in_truth instead of throwing.
MetricsReport metrics(std::span<const Verdict> verdicts, std::span<const Label> truth);

/// Tab-separated: source_id, line_no, score, threshold, label.
std::string format_verdicts(std::span<const Verdict> verdicts);
std::vector<Verdict> parse_verdicts(std::string_view text);
std::string format_metrics(const MetricsReport& m);

struct Collision {
  std::size_t test_index = 0;
  std::string partition;  // "train" or "validation"
  std::string text;
};

/// Test logs whose cleaned text also appears in training or calibration.
std::vector<Collision> find_leakage(const Split& corpora);

/// Throws LeakageDetected listing every collision.
void check_leakage(const Split& corpora);

struct PipelineOptions {
  MaskingStrategy strategy;
  double percentile = 90.0;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::size_t threads = 1;
  std::size_t batch_size = 16;

  ScoreOptions score_options() const { return {strategy, seed, repeats, threads, batch_size}; }
};

struct PipelineResult {
  Threshold threshold;
  std::vector<ScoreReport> validation_reports;
  std::vector<ScoreReport> test_reports;
  std::vector<Verdict> verdicts;
  MetricsReport metrics;
};

/// Score validation, calibrate, score test, classify and measure. The leakage
/// guard runs first.
PipelineResult run_pipeline(const Checkpoint& checkpoint, const Vocabulary& vocab,
                            const Split& corpora, const PipelineOptions& options);

struct MaskingGridCell {
  MaskingStrategy strategy;
  double percentile = 0.0;
  double threshold = 0.0;
  MetricsReport metrics;
};

struct MaskingGrid {
  std::vector<MaskingStrategy> strategies;
  std::vector<double> percentiles;
  std::vector<MaskingGridCell> cells;  // strategy-major

  const MaskingGridCell& at(std::size_t s, std::size_t p) const {
    return cells[s * percentiles.size() + p];
  }
};

/// Every strategy x percentile cell, each recalibrated from validation scores
/// under its own strategy.
MaskingGrid ablate_masking(const Checkpoint& checkpoint, const Vocabulary& vocab,
                           const Split& corpora, std::span<const MaskingStrategy> strategies,
                           std::span<const double> percentiles, const PipelineOptions& options);

std::string format_grid(const MaskingGrid& grid);

struct FinetuneAblation {
  MetricsReport initialized;
  MetricsReport trained;
  double initialized_mean_normal_score = 0.0;  // over validation logs
  double trained_mean_normal_score = 0.0;
  double ln_vocab_size = 0.0;
};

/// Same pipeline and seeds with the initial parameters and with the trained ones.
FinetuneAblation ablate_finetune(const Checkpoint& initialized, const Checkpoint& trained,
                                 const Vocabulary& vocab, const Split& corpora,
                                 const PipelineOptions& options);

/// Trains from the split's training partition first.
FinetuneAblation ablate_finetune(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                 const Vocabulary& vocab, const Split& corpora,
                                 const PipelineOptions& options);

/// The checkpoint train() starts from, wrapped with the training metadata.
Checkpoint initial_checkpoint(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                              const std::string& vocab_hash);

std::string format_finetune(const FinetuneAblation& a);

}  // namespace adalog
