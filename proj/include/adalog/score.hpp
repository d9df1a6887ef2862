#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adalog/masking.hpp"
#include "adalog/metrics.hpp"
#include "adalog/train.hpp"

namespace adalog {

struct TokenProb {
  std::size_t position = 0;  // 0-based content position
  double p = 1.0;            // probability of the true token, floored
};

struct ScoreReport {
  LogRef raw_ref;
  double score = 0.0;
  std::size_t masked_count = 0;  // |M| of one plan
  std::vector<TokenProb> token_probs;  // all plans, plan order
  MaskingStrategy strategy;
  std::size_t repeats = 1;
  std::string checkpoint_hash;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// -mean ln p over the given probabilities.
double score_from_probs(std::span<const TokenProb> probs);

struct ScoreOptions {
  MaskingStrategy strategy;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::size_t threads = 1;
  std::size_t batch_size = 1;  // masked sequences per forward; never changes results
};

/// Throws VocabMismatch unless vocab is the one the checkpoint was trained with.
void require_vocab(const Checkpoint& checkpoint, const Vocabulary& vocab);

/// Anomaly score of one log. Random masking draws `repeats` plans from seed;
/// token-by-token masks every position in its own pass.
ScoreReport score_log(const Checkpoint& checkpoint, const TokenSequence& seq,
                      const MaskingStrategy& strategy, std::uint64_t seed, std::size_t repeats = 1);

/// Reports in input order; log i is scored with derive_seed(seed, {i}).
std::vector<ScoreReport> score_corpus(const Checkpoint& checkpoint,
                                      std::span<const TokenSequence> corpus,
                                      const ScoreOptions& options);

struct HeatmapMatrix {
  std::vector<LogRef> rows;
  std::size_t columns = 0;  // longest log
  std::vector<std::vector<std::optional<double>>> cells;
};

/// Token-by-token probabilities, one row per log.
HeatmapMatrix heatmap(const Checkpoint& checkpoint, std::span<const TokenSequence> corpus,
                      std::size_t threads = 1, std::size_t batch_size = 1);
HeatmapMatrix heatmap_from_reports(std::span<const ScoreReport> token_reports);

struct HeatmapSummary {
  std::vector<std::optional<double>> normal_by_position;
  std::vector<std::optional<double>> anomalous_by_position;
  std::optional<double> normal_mean;  // over every present cell
  std::optional<double> anomalous_mean;
};

/// Throws LengthMismatch.
HeatmapSummary summarize(const HeatmapMatrix& matrix, std::span<const Label> labels);

struct ScoreRow {
  LogRef raw_ref;
  double score = 0.0;
  std::size_t masked_count = 0;
  MaskingStrategy strategy;
};

struct ScoresFile {
  std::string checkpoint_hash;
  std::string vocab_hash;
  std::size_t repeats = 1;
  std::vector<ScoreRow> rows;
};

/// Tab-separated: source_id, line_no, score, masked_count, strategy, preceded
/// by "#key=value" lines carrying the digests.
std::string format_scores(std::span<const ScoreReport> reports, const std::string& vocab_hash);
ScoresFile parse_scores(std::string_view text);

/// Matrix with "NA" for missing cells; first two columns are source_id, line_no.
std::string format_heatmap(const HeatmapMatrix& matrix);

}  // namespace adalog
