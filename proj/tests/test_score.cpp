#include <gtest/gtest.h>

#include <cmath>

#include "adalog/error.hpp"
#include "adalog/score.hpp"
#include "support.hpp"

using namespace adalog;
using adalog::testing::make_seq;
using adalog::testing::perturbed_params;
using adalog::testing::tiny_config;

namespace {

Checkpoint tiny_checkpoint(std::uint64_t seed = 1) {
  Checkpoint c;
  c.params = perturbed_params(tiny_config(20, 16, 2, 2, 32, 10), seed);
  c.vocab_hash = "vocab";
  return c;
}

std::vector<TokenSequence> corpus() {
  std::vector<TokenSequence> out;
  for (std::size_t i = 0; i < 9; ++i) {
    std::vector<TokenId> ids;
    for (std::size_t k = 0; k < 2 + i % 7; ++k) ids.push_back(static_cast<TokenId>(4 + (i * 5 + k * 3) % 16));
    out.push_back(make_seq(ids, 10, i + 1));
  }
  return out;
}

void expect_self_consistent(const ScoreReport& r) {
  double s = 0;
  for (const auto& tp : r.token_probs) {
    EXPECT_GE(tp.p, kProbabilityFloor);
    EXPECT_LE(tp.p, 1.0);
    s -= std::log(tp.p);
  }
  EXPECT_NEAR(r.score, s / static_cast<double>(r.token_probs.size()), 1e-9);
}

}  // namespace

TEST(Score, TokenByTokenMatchesBruteForce) {
  const auto ck = tiny_checkpoint();
  for (const auto& seq : corpus()) {
    const auto r = score_log(ck, seq, MaskingStrategy::token_by_token(), 0);
    EXPECT_NEAR(r.score, adalog::testing::brute_force_token_score(ck.params, seq), 1e-9);
    EXPECT_EQ(r.masked_count, seq.length);
    EXPECT_EQ(r.token_probs.size(), seq.length);
    expect_self_consistent(r);
  }
}

TEST(Score, RandomMatchesOwnPlans) {
  const auto ck = tiny_checkpoint();
  const auto seq = corpus()[6];
  const auto r = score_log(ck, seq, MaskingStrategy::random(0.3), 77, 3);
  ASSERT_EQ(r.token_probs.size(), 3 * masked_count(seq.length, 0.3));
  double s = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto plan = plan_random(seq, 0.3, derive_seed(77, {stream_tag("plan"), k}));
    const auto out = forward(ck.params, {&plan.masked_sequence, 1});
    for (std::size_t j = 0; j < plan.masked_indices.size(); ++j, ++n) {
      EXPECT_EQ(r.token_probs[n].position, plan.masked_indices[j]);
      s -= std::log(out.probabilities[0](plan.masked_indices[j],
                                         static_cast<std::size_t>(plan.original_ids[j])));
    }
  }
  EXPECT_NEAR(r.score, s / static_cast<double>(n), 1e-9);
  expect_self_consistent(r);
}

TEST(Score, CorpusInvariantToBatchAndThreads) {
  const auto ck = tiny_checkpoint();
  const auto c = corpus();
  for (const auto& strategy : {MaskingStrategy::token_by_token(), MaskingStrategy::random(0.25)}) {
    ScoreOptions base{strategy, 5, 2, 1, 1};
    const auto ref = score_corpus(ck, c, base);
    for (std::size_t batch : {2, 7, 64})
      for (std::size_t threads : {1, 3}) {
        auto o = base;
        o.batch_size = batch;
        o.threads = threads;
        const auto got = score_corpus(ck, c, o);
        ASSERT_EQ(got.size(), ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(got[i].score, ref[i].score);
      }
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_EQ(ref[i].score, score_log(ck, c[i], strategy, derive_seed(5, {i}), 2).score);
      EXPECT_EQ(ref[i].raw_ref, c[i].raw_ref);
    }
  }
}

TEST(Score, LowerProbabilityMeansHigherScore) {
  // Raising the head bias of the true tokens raises their probability everywhere.
  auto ck = tiny_checkpoint(3);
  const auto seq = make_seq({5, 5, 5, 5}, 10);
  const double before = score_log(ck, seq, MaskingStrategy::token_by_token(), 0).score;
  ck.params.head.bias[5] += 2.0;
  const double after = score_log(ck, seq, MaskingStrategy::token_by_token(), 0).score;
  EXPECT_LT(after, before);
  ck.params.head.bias[5] -= 5.0;
  EXPECT_GT(score_log(ck, seq, MaskingStrategy::token_by_token(), 0).score, before);
}

TEST(Score, ScoreFromProbsAndFloor) {
  const std::vector<TokenProb> probs = {{0, 0.5}, {1, 0.25}};
  EXPECT_NEAR(score_from_probs(probs), (std::log(2.0) + std::log(4.0)) / 2, 1e-15);
  auto ck = tiny_checkpoint();
  ck.params.head.bias[7] = -80.0;  // probability below the floor
  const auto r = score_log(ck, make_seq({7}, 10), MaskingStrategy::token_by_token(), 0);
  EXPECT_EQ(r.token_probs[0].p, kProbabilityFloor);
  EXPECT_NEAR(r.score, -std::log(kProbabilityFloor), 1e-9);
}

TEST(Score, MoreRepeatsReduceSpread) {
  const auto ck = tiny_checkpoint(4);
  const auto seq = make_seq({4, 9, 14, 7, 11, 6, 8, 12, 13, 10}, 10);
  auto spread = [&](std::size_t repeats) {
    std::vector<double> xs;
    for (std::uint64_t s = 0; s < 60; ++s) xs.push_back(score_log(ck, seq, MaskingStrategy::random(0.15), s, repeats).score);
    double mean = 0, var = 0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    for (double x : xs) var += (x - mean) * (x - mean);
    return var / (xs.size() - 1);
  };
  EXPECT_LT(spread(8), spread(1));
}

TEST(Score, FormatParseRoundTrip) {
  const auto ck = tiny_checkpoint();
  const auto reports = score_corpus(ck, corpus(), {MaskingStrategy::random(0.15), 1, 2, 1, 4});
  const auto parsed = parse_scores(format_scores(reports, "vh"));
  EXPECT_EQ(parsed.checkpoint_hash, ck.digest());
  EXPECT_EQ(parsed.vocab_hash, "vh");
  EXPECT_EQ(parsed.repeats, 2u);
  ASSERT_EQ(parsed.rows.size(), reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    EXPECT_EQ(parsed.rows[i].score, reports[i].score);
    EXPECT_EQ(parsed.rows[i].raw_ref, reports[i].raw_ref);
    EXPECT_EQ(parsed.rows[i].masked_count, reports[i].masked_count);
    EXPECT_EQ(parsed.rows[i].strategy, reports[i].strategy);
  }
  EXPECT_THROW(parse_scores("source_id\tline_no\tscore\tmasked_count\tstrategy\nx\t1\tnan?\t1\ttoken\n"), Error);
}

TEST(Score, HeatmapShapeAndSummary) {
  const auto ck = tiny_checkpoint();
  const auto c = corpus();
  const auto m = heatmap(ck, c, 2, 5);
  ASSERT_EQ(m.rows.size(), c.size());
  EXPECT_EQ(m.columns, 8u);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t k = 0; k < m.columns; ++k) EXPECT_EQ(m.cells[i][k].has_value(), k < c[i].length);
  std::vector<Label> labels(c.size(), Label::Normal);
  labels[0] = Label::Anomalous;
  const auto s = summarize(m, labels);
  EXPECT_NEAR(*s.anomalous_mean, (*m.cells[0][0] + *m.cells[0][1]) / 2, 1e-15);
  EXPECT_FALSE(s.anomalous_by_position[2].has_value());
  EXPECT_TRUE(s.normal_mean.has_value());
  EXPECT_THROW(summarize(m, std::vector<Label>(2, Label::Normal)), Error);
  const auto text = format_heatmap(m);
  EXPECT_NE(text.find("NA"), std::string::npos);
}

TEST(Score, VocabGuard) {
  auto ck = tiny_checkpoint();
  const Vocabulary v({"a", "b"});
  EXPECT_THROW(require_vocab(ck, v), Error);
}
