#include "adalog/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "adalog/error.hpp"
#include "adalog/io.hpp"

namespace adalog {

double quantile(std::span<const double> scores, double percentile) {
  if (scores.empty()) throw Error(ErrorKind::EmptyScores, "no calibration scores");
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw Error(ErrorKind::InvalidArgument, "percentile must lie in (0, 100]");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw Error(ErrorKind::NonFiniteScore, "calibration score " + std::to_string(i) + " is not finite");
    }
  }
  std::vector<double> x(scores.begin(), scores.end());
  const double h = static_cast<double>(x.size() - 1) * percentile / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(lo), x.end());
  const double below = x[lo];
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= x.size() || frac == 0.0) return below;
  const double above = *std::min_element(x.begin() + static_cast<std::ptrdiff_t>(lo) + 1, x.end());
  return below + frac * (above - below);
}

Threshold select_threshold(std::span<const double> scores, double percentile) {
  Threshold t;
  t.value = quantile(scores, percentile);
  t.percentile = percentile;
  t.n_calibration = scores.size();
  return t;
}

std::vector<SweepRow> sweep(std::span<const double> scores_normal,
                            std::span<const double> percentiles,
                            std::span<const std::pair<double, Label>> labeled_test_scores) {
  std::vector<Label> truth;
  truth.reserve(labeled_test_scores.size());
  for (const auto& [score, label] : labeled_test_scores) truth.push_back(label);

  std::vector<SweepRow> rows;
  for (double p : percentiles) {
    SweepRow row;
    row.percentile = p;
    row.threshold = quantile(scores_normal, p);
    std::vector<Label> predicted;
    predicted.reserve(truth.size());
    for (const auto& [score, label] : labeled_test_scores) {
      predicted.push_back(score > row.threshold ? Label::Anomalous : Label::Normal);
    }
    row.metrics = confusion_metrics(predicted, truth);
    rows.push_back(row);
  }
  return rows;
}

std::string threshold_to_json(const Threshold& t) {
  nlohmann::ordered_json j;
  j["value"] = t.value;
  j["percentile"] = t.percentile;
  j["n_calibration"] = t.n_calibration;
  j["checkpoint_hash"] = t.checkpoint_hash;
  j["vocab_hash"] = t.vocab_hash;
  j["strategy"] = t.strategy.descriptor();
  j["repeats"] = t.repeats;
  return j.dump(2) + "\n";
}

Threshold threshold_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Threshold t;
    t.value = j.at("value").get<double>();
    t.percentile = j.at("percentile").get<double>();
    t.n_calibration = j.at("n_calibration").get<std::size_t>();
    t.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
    t.vocab_hash = j.at("vocab_hash").get<std::string>();
    t.strategy = MaskingStrategy::parse(j.at("strategy").get<std::string>());
    t.repeats = j.value("repeats", std::size_t{1});
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("threshold file: ") + e.what());
  }
}

std::string format_sweep(std::span<const SweepRow> rows) {
  std::string out = "percentile\tthreshold\ttp\tfp\tfn\ttn\tprecision\trecall\tf1\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += format_double(r.percentile) + "\t" + format_double(r.threshold) + "\t" +
           std::to_string(m.tp) + "\t" + std::to_string(m.fp) + "\t" + std::to_string(m.fn) + "\t" +
           std::to_string(m.tn) + "\t" + format_double(m.precision) + "\t" +
           format_double(m.recall) + "\t" + format_double(m.f1) + "\n";
  }
  return out;
}

}  // namespace adalog
