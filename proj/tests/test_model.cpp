#include <gtest/gtest.h>

#include <cmath>

#include "adalog/error.hpp"
#include "adalog/model.hpp"
#include "support.hpp"

using namespace adalog;
using adalog::testing::make_seq;
using adalog::testing::perturbed_params;
using adalog::testing::tiny_config;

namespace {

std::vector<TokenSequence> sample_batch(std::size_t max_len) {
  return {make_seq({4, 7, 9, 5, 11}, max_len, 1), make_seq({12, 4, 4}, max_len, 2),
          make_seq({6, 2, 13, 8, 19, 10, 3}, max_len, 3)};
}

std::vector<MaskedTargets> sample_targets() {
  return {{{1, 3}, {7, 5}}, {{0}, {12}}, {{1, 4, 6}, {14, 19, 3}}};
}

}  // namespace

TEST(Model, ForwardMatchesReferenceLoops) {
  const auto cfg = tiny_config(20, 16, 4, 2, 24, 10);
  const auto p = perturbed_params(cfg, 3);
  const auto batch = sample_batch(cfg.max_len);
  const auto out = forward(p, batch);
  ASSERT_EQ(out.logits.size(), batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto content = std::vector<TokenId>(batch[b].ids.begin(), batch[b].ids.begin() + batch[b].length);
    const auto ref = adalog::testing::reference_logits(p, content);
    for (std::size_t i = 0; i < content.size(); ++i)
      for (std::size_t v = 0; v < cfg.vocab_size; ++v)
        EXPECT_NEAR(out.logits[b](i, v), ref[i][v], 1e-9) << b << "," << i << "," << v;
  }
}

TEST(Model, GradientMatchesFiniteDifferences) {
  const auto cfg = tiny_config();
  const auto p = perturbed_params(cfg, 11);
  const auto batch = sample_batch(cfg.max_len);
  const auto check = adalog::testing::gradient_check(p, batch, sample_targets(), 1e-3, 8, 5);
  EXPECT_GE(check.coordinates, 100u);
  EXPECT_EQ(check.per_tensor.size(), 22u);
  EXPECT_LT(check.max_rel_error, 1e-4) << check.worst;
}

// Attention curvature makes the O(h^2) term visible at 1e-3 here.
TEST(Model, GradientMatchesFiniteDifferencesMultiHead) {
  const auto cfg = tiny_config(20, 16, 4, 2, 24, 8);
  const auto p = perturbed_params(cfg, 12);
  const auto check =
      adalog::testing::gradient_check(p, sample_batch(cfg.max_len), sample_targets(), 1e-5, 4, 6);
  EXPECT_LT(check.max_rel_error, 1e-4) << check.worst;
}

TEST(Model, FusedLossMatchesForwardLoss) {
  const auto cfg = tiny_config();
  const auto p = perturbed_params(cfg, 2);
  const auto batch = sample_batch(cfg.max_len);
  const auto targets = sample_targets();
  const double fwd = mlm_loss(forward(p, batch), targets);
  EXPECT_NEAR(loss_and_gradient(p, batch, targets).loss, fwd, 1e-12);

  // Textbook cross-entropy on the reference logits.
  double total = 0;
  std::size_t n = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto ref = adalog::testing::reference_logits(
        p, {batch[b].ids.begin(), batch[b].ids.begin() + batch[b].length});
    for (std::size_t m = 0; m < targets[b].positions.size(); ++m, ++n)
      total += adalog::testing::reference_nll(ref[targets[b].positions[m]],
                                              static_cast<std::size_t>(targets[b].token_ids[m]));
  }
  EXPECT_NEAR(fwd, total / n, 1e-9);
}

TEST(Model, ProbabilityRowsSumToOne) {
  const auto cfg = tiny_config(20, 16, 2, 2, 32, 8);
  const auto out = forward(perturbed_params(cfg, 4), sample_batch(cfg.max_len));
  for (const auto& probs : out.probabilities)
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      double s = 0;
      for (std::size_t v = 0; v < probs.cols(); ++v) {
        EXPECT_GE(probs(i, v), 0.0);
        s += probs(i, v);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Model, ConstantLogitsGiveLogVocab) {
  auto cfg = tiny_config(37);
  auto p = perturbed_params(cfg, 5);
  p.head.weight.fill(0.0);
  p.head.bias.fill(0.25);
  const double loss = mlm_loss(forward(p, sample_batch(cfg.max_len)), sample_targets());
  EXPECT_NEAR(loss, std::log(37.0), 1e-12);
}

TEST(Model, PaddingDoesNotLeakIntoContent) {
  const auto cfg = tiny_config(20, 16, 2, 1, 32, 12);
  const auto p = perturbed_params(cfg, 6);
  const auto short_pad = make_seq({4, 7, 9}, 4);
  auto long_pad = make_seq({4, 7, 9}, 12);
  const auto a = forward(p, {&short_pad, 1});
  const auto b = forward(p, {&long_pad, 1});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t v = 0; v < cfg.vocab_size; ++v) EXPECT_EQ(a.logits[0](i, v), b.logits[0](i, v));

  const MaskedTargets t{{0, 2}, {4, 9}};
  const auto lp = masked_log_probs(p, long_pad, t);
  EXPECT_NEAR(std::exp(lp[0]), b.probabilities[0](0, 4), 1e-12);
  EXPECT_NEAR(std::exp(lp[1]), b.probabilities[0](2, 9), 1e-12);
}

TEST(Model, PermutationEquivariantWithoutPositions) {
  const auto cfg = tiny_config(20, 16, 2, 2, 32, 6);
  auto p = perturbed_params(cfg, 7);
  p.position_embedding.fill(0.0);
  const std::vector<TokenId> ids = {4, 9, 13, 6, 17};
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  std::vector<TokenId> shuffled;
  for (auto k : perm) shuffled.push_back(ids[k]);
  const auto x = make_seq(ids, 6), y = make_seq(shuffled, 6);
  const auto a = forward(p, {&x, 1}), b = forward(p, {&y, 1});
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t v = 0; v < cfg.vocab_size; ++v)
      EXPECT_NEAR(b.logits[0](i, v), a.logits[0](perm[i], v), 1e-12);
}

TEST(Model, BatchedEqualsUnbatched) {
  const auto cfg = tiny_config(20, 16, 2, 2, 32, 8);
  const auto p = perturbed_params(cfg, 8);
  const auto batch = sample_batch(cfg.max_len);
  const auto targets = sample_targets();
  const auto all = forward(p, batch);
  const auto lp_all = masked_log_probs_batch(p, batch, targets);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto one = forward(p, {&batch[b], 1});
    EXPECT_EQ(one.logits[0], all.logits[b]);
    EXPECT_EQ(masked_log_probs(p, batch[b], targets[b]), lp_all[b]);
  }
}

TEST(Model, DefaultParameterCount) {
  ModelConfig cfg;
  cfg.vocab_size = 4096;
  EXPECT_EQ(Parameters::zeros(cfg).parameter_count(), 1334272u);
  EXPECT_EQ(init_params(cfg, 0).parameter_count(), 1334272u);
}

TEST(Model, AbsentTokenHasZeroEmbeddingGradient) {
  const auto cfg = tiny_config();
  const auto g = backward(perturbed_params(cfg, 9), sample_batch(cfg.max_len), sample_targets());
  for (std::size_t j = 0; j < cfg.d_model; ++j) {
    EXPECT_EQ(g.token_embedding(15, j), 0.0);  // 15 appears nowhere
    EXPECT_EQ(g.token_embedding(special::kPad, j), 0.0);
    EXPECT_EQ(g.position_embedding(7, j), 0.0);  // beyond every content length
  }
}

TEST(Model, InitialisationRangeAndDeterminism) {
  const auto cfg = tiny_config(30, 16);
  const auto a = init_params(cfg, 42), b = init_params(cfg, 42), c = init_params(cfg, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  const double bound = 1.0 / std::sqrt(16.0);
  a.for_each([&](const std::string& name, const Tensor& t) {
    for (double v : t.values()) {
      EXPECT_EQ(static_cast<double>(static_cast<float>(v)), v) << name;
      if (name.ends_with(".gain")) {
        EXPECT_EQ(v, 1.0);
      } else if (name.ends_with(".bias") || name.ends_with(".offset")) {
        EXPECT_EQ(v, 0.0);
      } else {
        EXPECT_LE(std::abs(v), bound) << name;
      }
    }
  });
  EXPECT_EQ(parameters_digest(a), parameters_digest(b));
  EXPECT_NE(parameters_digest(a), parameters_digest(c));
}

TEST(Model, DropoutOnlyInTrainMode) {
  auto cfg = tiny_config(20, 16, 2, 1, 32, 8);
  cfg.dropout_rate = 0.3;
  const auto p = perturbed_params(cfg, 10);
  const auto batch = sample_batch(cfg.max_len);
  const auto eval = forward(p, batch);
  const auto t1 = forward(p, batch, true, 99);
  const auto t2 = forward(p, batch, true, 99);
  const auto t3 = forward(p, batch, true, 100);
  EXPECT_EQ(t1.logits, t2.logits);
  EXPECT_NE(t1.logits, eval.logits);
  EXPECT_NE(t1.logits, t3.logits);
  cfg.dropout_rate = 0.0;
  auto q = p;
  q.config = cfg;
  EXPECT_EQ(forward(q, batch, true, 99).logits, forward(q, batch).logits);
}

TEST(Model, GradientIndependentOfThreads) {
  const auto cfg = tiny_config();
  const auto p = perturbed_params(cfg, 13);
  const auto batch = sample_batch(cfg.max_len);
  const auto targets = sample_targets();
  GradientOptions one, four;
  one.shards = four.shards = 3;
  four.threads = 4;
  EXPECT_EQ(loss_and_gradient(p, batch, targets, one).gradient,
            loss_and_gradient(p, batch, targets, four).gradient);
}

TEST(Model, LogSoftmaxIsStable) {
  const std::vector<double> logits = {1000.0, 1000.0, -1000.0};
  std::vector<double> out(3);
  log_softmax(logits, out);
  EXPECT_NEAR(out[0], -std::log(2.0), 1e-12);
  EXPECT_TRUE(std::isfinite(out[2]));
}

TEST(Model, RejectsBadInputs) {
  const auto cfg = tiny_config();
  const auto p = perturbed_params(cfg, 1);
  auto bad = make_seq({4, 25}, cfg.max_len);
  try {
    forward(p, {&bad, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::VocabMismatch);
  }
  const auto batch = sample_batch(cfg.max_len);
  const std::vector<MaskedTargets> none(batch.size());
  try {
    loss_and_gradient(p, batch, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoMaskedPositions);
  }
  auto bad_cfg = cfg;
  bad_cfg.n_heads = 3;
  EXPECT_THROW(bad_cfg.validate(), Error);
}
