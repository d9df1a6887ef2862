#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "adalog/calibrate.hpp"
#include "adalog/error.hpp"
#include "adalog/rng.hpp"
#include "support.hpp"

using namespace adalog;
using adalog::testing::quantile_oracle;

namespace {

std::vector<double> random_scores(Rng& rng, std::size_t n, int flavour) {
  std::vector<double> xs(n);
  for (double& x : xs) {
    switch (flavour) {
      case 0: x = rng.uniform(0.0, 10.0); break;
      case 1: x = static_cast<double>(rng.below(5));  break;  // heavy ties
      case 2: x = 3.25; break;                                 // constant
      default: x = std::exp(rng.uniform(-3.0, 3.0)); break;
    }
  }
  return xs;
}

}  // namespace

TEST(Calibrate, OneToTenAtNinety) {
  const std::vector<double> xs = {7, 3, 10, 1, 2, 9, 4, 6, 5, 8};
  EXPECT_NEAR(select_threshold(xs, 90).value, 9.1, 1e-12);
  EXPECT_EQ(select_threshold(xs, 100).value, 10.0);
  EXPECT_EQ(select_threshold(xs, 90).n_calibration, 10u);
  EXPECT_EQ(select_threshold(xs).percentile, 90.0);
}

TEST(Calibrate, MatchesSortOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(trial < 500 ? 20 : 400);
    const auto xs = random_scores(rng, n, trial % 4);
    double p = rng.uniform(0.0, 100.0);
    if (trial % 10 == 0) p = 90.0;
    if (trial % 10 == 1) p = 100.0;
    if (p == 0.0) p = 50.0;
    EXPECT_EQ(quantile(xs, p), quantile_oracle(xs, p)) << "trial " << trial;
  }
  const auto big = random_scores(rng, 10000, 0);
  EXPECT_EQ(select_threshold(big, 90).value, quantile_oracle(big, 90));
}

TEST(Calibrate, ConstantScores) {
  const std::vector<double> xs(17, 2.5);
  for (double p : {0.5, 50.0, 90.0, 100.0}) EXPECT_EQ(quantile(xs, p), 2.5);
}

TEST(Calibrate, PurityBoundAndMonotonicity) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    const auto xs = random_scores(rng, n, trial % 4);
    double last = -std::numeric_limits<double>::infinity();
    for (double p = 5; p <= 100; p += 5) {
      const double t = quantile(xs, p);
      EXPECT_GE(t, last);
      last = t;
      const auto above = std::count_if(xs.begin(), xs.end(), [&](double x) { return x > t; });
      EXPECT_LE(static_cast<double>(above) / n, (100 - p) / 100 + 1.0 / n + 1e-12);
    }
  }
}

TEST(Calibrate, Errors) {
  auto kind = [](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::FormatError;
  };
  EXPECT_EQ(kind([] { quantile({}, 90); }), ErrorKind::EmptyScores);
  const std::vector<double> bad = {1.0, std::nan("")};
  EXPECT_EQ(kind([&] { quantile(bad, 90); }), ErrorKind::NonFiniteScore);
  const std::vector<double> inf = {1.0, std::numeric_limits<double>::infinity()};
  EXPECT_EQ(kind([&] { quantile(inf, 90); }), ErrorKind::NonFiniteScore);
  const std::vector<double> ok = {1.0};
  EXPECT_EQ(kind([&] { quantile(ok, 0.0); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind([&] { quantile(ok, 100.5); }), ErrorKind::InvalidArgument);
}

TEST(Calibrate, SweepIsConsistentAndMonotone) {
  Rng rng(4);
  const auto normal = random_scores(rng, 200, 0);
  std::vector<std::pair<double, Label>> test;
  for (int i = 0; i < 150; ++i) test.emplace_back(rng.uniform(0.0, 10.0), Label::Normal);
  for (int i = 0; i < 50; ++i) test.emplace_back(rng.uniform(7.0, 14.0), Label::Anomalous);
  const std::vector<double> pcts = {70, 75, 80, 85, 90, 95, 99, 100};
  const auto rows = sweep(normal, pcts, test);
  ASSERT_EQ(rows.size(), pcts.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].threshold, quantile(normal, pcts[i]));
    EXPECT_EQ(rows[i].metrics.total(), test.size());
    if (i) EXPECT_LE(rows[i].metrics.predicted_positive(), rows[i - 1].metrics.predicted_positive());
    std::size_t tp = 0, fp = 0;
    for (const auto& [s, l] : test) {
      if (s > rows[i].threshold) (l == Label::Anomalous ? tp : fp)++;
    }
    EXPECT_EQ(rows[i].metrics.tp, tp);
    EXPECT_EQ(rows[i].metrics.fp, fp);
  }
  EXPECT_EQ(rows.back().threshold, *std::max_element(normal.begin(), normal.end()));
}

TEST(Calibrate, ThresholdJsonRoundTrip) {
  Threshold t;
  t.value = 2.718281828459045;
  t.percentile = 95;
  t.n_calibration = 177;
  t.checkpoint_hash = "ck";
  t.vocab_hash = "vh";
  t.strategy = MaskingStrategy::random(0.25);
  t.repeats = 3;
  const auto back = threshold_from_json(threshold_to_json(t));
  EXPECT_EQ(back.value, t.value);
  EXPECT_EQ(back.percentile, 95.0);
  EXPECT_EQ(back.n_calibration, 177u);
  EXPECT_EQ(back.checkpoint_hash, "ck");
  EXPECT_EQ(back.vocab_hash, "vh");
  EXPECT_EQ(back.strategy, t.strategy);
  EXPECT_EQ(back.repeats, 3u);
  EXPECT_THROW(threshold_from_json("{\"value\": 1"), Error);
}
