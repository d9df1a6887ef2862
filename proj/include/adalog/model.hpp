#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adalog/tensor.hpp"
#include "adalog/tokenize.hpp"

namespace adalog {

struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 256;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t vocab_size = 0;
  double dropout_rate = 0.1;

  /// Throws ConfigInvalid.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
  friend bool operator==(const Linear&, const Linear&) = default;
};

struct Norm {
  Tensor gain;    // [d_model]
  Tensor offset;  // [d_model]
  friend bool operator==(const Norm&, const Norm&) = default;
};

struct EncoderLayer {
  Norm attention_norm;
  Linear query, key, value, output;
  Norm ffn_norm;
  Linear ffn_input;   // [d_model x d_ff]
  Linear ffn_output;  // [d_ff x d_model]
  friend bool operator==(const EncoderLayer&, const EncoderLayer&) = default;
};

/// The named tensor collection of the encoder. The same type holds gradients.
struct Parameters {
  ModelConfig config;
  Tensor token_embedding;     // [vocab x d_model]
  Tensor position_embedding;  // [max_len x d_model]
  std::vector<EncoderLayer> layers;
  Norm final_norm;
  Linear head;  // [d_model x vocab]

  /// Zero tensors with the shapes implied by cfg.
  static Parameters zeros(const ModelConfig& cfg);

  /// Visits every tensor with its canonical name, in canonical order.
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  std::size_t parameter_count() const;
  bool all_finite() const;

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

/// Weights uniform in [-1/sqrt(d_model), 1/sqrt(d_model)], rounded to float32;
/// biases and norm offsets 0, norm gains 1.
Parameters init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Rounds every value to the nearest float32 (what a checkpoint can hold).
void round_to_float32(Parameters& params);

/// SHA-256 over names, shapes and float32 payloads.
std::string parameters_digest(const Parameters& params);

/// Masked positions of one sequence and the token ids expected there.
struct MaskedTargets {
  std::vector<std::size_t> positions;
  std::vector<TokenId> token_ids;
};

struct ForwardOutput {
  std::size_t common_len = 0;
  std::vector<Tensor> logits;         // per sequence [common_len x vocab]
  std::vector<Tensor> probabilities;  // softmax of logits per row
};

/// Full encoder forward over a batch padded to a common length. PAD keys are
/// excluded from attention. Dropout runs only in train_mode, driven by seed.
/// Throws ShapeMismatch, VocabMismatch, NonFiniteActivation.
ForwardOutput forward(const Parameters& params, std::span<const TokenSequence> batch,
                      bool train_mode = false, std::uint64_t seed = 0);

/// Mean of -ln P(target) over every masked position of the batch.
/// Throws NoMaskedPositions.
double mlm_loss(const ForwardOutput& out, std::span<const MaskedTargets> targets);

/// Exact gradients of mlm_loss (dropout disabled). Throws NonFiniteGradient.
Parameters backward(const Parameters& params, std::span<const TokenSequence> batch,
                    std::span<const MaskedTargets> targets);

struct LossAndGradient {
  double loss = 0.0;  // mean over masked positions
  std::size_t masked = 0;
  Parameters gradient;
};

struct GradientOptions {
  std::optional<std::uint64_t> dropout_seed;  // replayed identically in forward and backward
  std::size_t shards = 8;                     // fixed reduction tree, independent of threads
  std::size_t threads = 1;
};

/// Fused loss + gradient, the training hot path. Per-shard gradients are
/// summed in shard order so results do not depend on the thread count.
LossAndGradient loss_and_gradient(const Parameters& params, std::span<const TokenSequence> batch,
                                  std::span<const MaskedTargets> targets,
                                  const GradientOptions& options = {});

/// Log-probabilities of the true token at each masked position of one
/// sequence, computed on only its content rows (no dropout).
std::vector<double> masked_log_probs(const Parameters& params, const TokenSequence& masked,
                                     const MaskedTargets& targets);

/// Batched form of masked_log_probs: sequences are padded to the longest
/// content length in the batch. Results are identical to unbatched calls.
std::vector<std::vector<double>> masked_log_probs_batch(const Parameters& params,
                                                        std::span<const TokenSequence> masked,
                                                        std::span<const MaskedTargets> targets);

/// Numerically stable log-softmax of one row.
void log_softmax(std::span<const double> logits, std::span<double> out);

}  // namespace adalog
