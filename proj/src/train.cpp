#include "adalog/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "adalog/error.hpp"
#include "adalog/masking.hpp"
#include "adalog/parallel.hpp"
#include "adalog/rng.hpp"

namespace adalog {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::ConfigInvalid, what); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(mask_fraction > 0.0 && mask_fraction <= 1.0)) fail("mask_fraction must lie in (0, 1]");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail("betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (grad_clip && !(*grad_clip > 0.0)) fail("grad_clip must be > 0 when set");
  if (grad_shards < 1) fail("grad_shards must be >= 1");
}

AdamW::AdamW(const Parameters& shape, const TrainConfig& cfg)
    : cfg_(cfg), m_(Parameters::zeros(shape.config)), v_(Parameters::zeros(shape.config)) {}

double AdamW::step(Parameters& params, Parameters& grad) {
  ++step_;
  double sq = 0.0;
  grad.for_each([&](const std::string&, const Tensor& t) {
    for (double g : t.values()) sq += g * g;
  });
  const double norm = std::sqrt(sq);
  if (cfg_.grad_clip && norm > *cfg_.grad_clip) {
    const double scale = *cfg_.grad_clip / norm;
    grad.for_each([&](const std::string&, Tensor& t) {
      for (double& g : t.values()) g *= scale;
    });
  }
  double lr = cfg_.learning_rate;
  if (cfg_.warmup_steps > 0) {
    lr *= std::min(1.0, static_cast<double>(step_) / static_cast<double>(cfg_.warmup_steps));
  }
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);

  std::vector<Tensor*> gs, ms, vs;
  grad.for_each([&](const std::string&, Tensor& x) { gs.push_back(&x); });
  m_.for_each([&](const std::string&, Tensor& x) { ms.push_back(&x); });
  v_.for_each([&](const std::string&, Tensor& x) { vs.push_back(&x); });
  std::size_t idx = 0;
  params.for_each([&](const std::string& name, Tensor& p) {
    const bool decay = name.ends_with(".weight") || name == "embeddings.token";
    Tensor& g = *gs[idx];
    Tensor& m = *ms[idx];
    Tensor& v = *vs[idx];
    ++idx;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.epsilon);
      if (decay) p[i] -= lr * cfg_.weight_decay * p[i];
      p[i] -= lr * update;
    }
  });
  return norm;
}

Parameters initial_parameters(const ModelConfig& model_cfg, const TrainConfig& cfg) {
  return init_params(model_cfg, derive_seed(cfg.seed, {stream_tag("init")}));
}

namespace {

void check_corpus(std::span<const TokenSequence> corpus, const ModelConfig& cfg) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "training corpus is empty");
  for (const auto& seq : corpus) {
    if (seq.length < 1 || seq.length > cfg.max_len) {
      throw Error(ErrorKind::ShapeMismatch, "sequence length outside [1, max_len]");
    }
    for (std::size_t i = 0; i < seq.length; ++i) {
      if (seq.ids[i] < 0 || static_cast<std::size_t>(seq.ids[i]) >= cfg.vocab_size) {
        throw Error(ErrorKind::VocabMismatch, "token id outside the model vocabulary");
      }
    }
  }
}

}  // namespace

Checkpoint train(std::span<const TokenSequence> corpus_train, const ModelConfig& model_cfg,
                 const TrainConfig& cfg, const std::string& vocab_hash,
                 const EpochObserver& observer) {
  cfg.validate();
  model_cfg.validate();
  check_corpus(corpus_train, model_cfg);

  Checkpoint ckpt;
  ckpt.vocab_hash = vocab_hash;
  ckpt.train_config = cfg;
  ckpt.params = initial_parameters(model_cfg, cfg);
  AdamW optimizer(ckpt.params, cfg);

  const std::size_t n = corpus_train.size();
  std::vector<std::size_t> order(n);
  std::vector<TokenSequence> batch;
  std::vector<MaskedTargets> targets;
  GradientOptions gopts;
  gopts.shards = cfg.grad_shards;
  gopts.threads = cfg.threads;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {stream_tag("shuffle"), epoch}));
    shuffle_rng.shuffle(order.begin(), order.end());

    double loss_sum = 0.0;
    std::size_t masked_total = 0;
    for (std::size_t start = 0, batch_no = 0; start < n; start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      batch.clear();
      targets.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        auto plan = plan_random(corpus_train[idx], cfg.mask_fraction,
                                derive_seed(cfg.seed, {stream_tag("mask"), epoch, idx}));
        targets.push_back(plan.targets());
        batch.push_back(std::move(plan.masked_sequence));
      }
      gopts.dropout_seed = derive_seed(cfg.seed, {stream_tag("dropout"), epoch, batch_no});
      LossAndGradient lg;
      try {
        lg = loss_and_gradient(ckpt.params, batch, targets, gopts);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NonFiniteActivation || e.kind() == ErrorKind::NonFiniteGradient) {
          throw Error(ErrorKind::DivergenceDetected,
                      "epoch " + std::to_string(epoch) + ": " + e.what());
        }
        throw;
      }
      loss_sum += lg.loss * static_cast<double>(lg.masked);
      masked_total += lg.masked;
      optimizer.step(ckpt.params, lg.gradient);
    }
    if (!ckpt.params.all_finite()) {
      throw Error(ErrorKind::DivergenceDetected,
                  "non-finite parameters after epoch " + std::to_string(epoch));
    }
    const double mean = loss_sum / static_cast<double>(masked_total);
    ckpt.history.push_back(mean);
    if (observer) {
      const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - started;
      observer({epoch, mean, wall.count()});
    }
  }
  round_to_float32(ckpt.params);
  ckpt.final_loss = ckpt.history.back();
  return ckpt;
}

double evaluate_loss(const Parameters& params, std::span<const TokenSequence> corpus,
                     double mask_fraction, std::uint64_t seed, std::size_t threads) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "evaluation corpus is empty");
  std::vector<double> sums(corpus.size(), 0.0);
  std::vector<std::size_t> counts(corpus.size(), 0);
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const auto plan =
        plan_random(corpus[i], mask_fraction, derive_seed(seed, {stream_tag("eval-mask"), i}));
    const auto lp = masked_log_probs(params, plan.masked_sequence, plan.targets());
    for (double v : lp) sums[i] -= v;
    counts[i] = lp.size();
  });
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    total += sums[i];
    count += counts[i];
  }
  return total / static_cast<double>(count);
}

double evaluate_loss(const Checkpoint& checkpoint, std::span<const TokenSequence> corpus,
                     const std::string& vocab_hash, std::uint64_t seed, std::size_t threads) {
  if (vocab_hash != checkpoint.vocab_hash) {
    throw Error(ErrorKind::VocabMismatch, "vocabulary digest " + vocab_hash +
                                              " does not match checkpoint vocabulary " +
                                              checkpoint.vocab_hash);
  }
  return evaluate_loss(checkpoint.params, corpus, checkpoint.train_config.mask_fraction, seed,
                       threads);
}

}  // namespace adalog
