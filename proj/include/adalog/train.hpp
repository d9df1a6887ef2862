#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adalog/model.hpp"
#include "adalog/tokenize.hpp"

namespace adalog {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double mask_fraction = 0.15;
  double learning_rate = 3e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> grad_clip = 1.0;  // global L2 norm
  std::size_t warmup_steps = 0;           // linear warmup, off by default
  std::uint64_t seed = 0;
  std::size_t grad_shards = 8;
  std::size_t threads = 1;  // not part of the result; any value gives identical output

  void validate() const;
};

struct Checkpoint {
  Parameters params;  // params.config is the ModelConfig
  std::string vocab_hash;
  TrainConfig train_config;
  double final_loss = 0.0;
  std::vector<double> history;  // mean masked-token loss per epoch

  const ModelConfig& model_config() const { return params.config; }
  std::string digest() const { return parameters_digest(params); }
};

struct EpochReport {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

using EpochObserver = std::function<void(const EpochReport&)>;

/// Trains a freshly initialized encoder on normal logs with the masked
/// language modeling objective. The returned parameters are rounded to
/// float32 so that a saved checkpoint reloads bit-identically.
/// Throws EmptyCorpus, DivergenceDetected.
Checkpoint train(std::span<const TokenSequence> corpus_train, const ModelConfig& model_cfg,
                 const TrainConfig& cfg, const std::string& vocab_hash,
                 const EpochObserver& observer = {});

/// Initial parameters used by train() for this configuration.
Parameters initial_parameters(const ModelConfig& model_cfg, const TrainConfig& cfg);

/// Mean MLM loss over the corpus under seeded random masking, no update.
double evaluate_loss(const Parameters& params, std::span<const TokenSequence> corpus,
                     double mask_fraction, std::uint64_t seed, std::size_t threads = 1);

/// As above, after checking vocab_hash against the checkpoint. Throws VocabMismatch.
double evaluate_loss(const Checkpoint& checkpoint, std::span<const TokenSequence> corpus,
                     const std::string& vocab_hash, std::uint64_t seed, std::size_t threads = 1);

/// AdamW with decoupled weight decay; decay skips biases, norms and position
/// embeddings.
class AdamW {
 public:
  AdamW(const Parameters& shape, const TrainConfig& cfg);

  /// One update; grad is clipped in place when a clip norm is configured.
  /// Returns the pre-clip global gradient norm.
  double step(Parameters& params, Parameters& grad);

  std::size_t steps() const { return step_; }

 private:
  TrainConfig cfg_;
  Parameters m_, v_;
  std::size_t step_ = 0;
};

// Checkpoint container: "ADALOG-CHECKPOINT 1\n", key=value header lines, a
// blank line, a u32 record count, then tensor records (u32 name length, name,
// u32 rank, u64 dims, float32 payload). All integers little-endian.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adalog
