#include "adalog/metrics.hpp"

#include "adalog/error.hpp"

namespace adalog {

std::string_view to_string(Label label) {
  return label == Label::Anomalous ? "anomalous" : "normal";
}

Label parse_label(std::string_view text) {
  if (text == "0" || text == "normal") return Label::Normal;
  if (text == "1" || text == "anomalous") return Label::Anomalous;
  throw Error(ErrorKind::FormatError, "label must be 0, 1, normal or anomalous, got '" +
                                          std::string(text) + "'");
}

MetricsReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  MetricsReport m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  if (tp + fp > 0) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    m.precision_undefined = true;
  }
  if (tp + fn > 0) {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    m.recall_undefined = true;
    m.no_anomalies_in_truth = true;
  }
  if (tp > 0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

MetricsReport confusion_metrics(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(predicted.size()) + " predictions vs " +
                                               std::to_string(truth.size()) + " labels");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool pred = predicted[i] == Label::Anomalous;
    const bool real = truth[i] == Label::Anomalous;
    if (pred && real) ++tp;
    else if (pred) ++fp;
    else if (real) ++fn;
    else ++tn;
  }
  return from_counts(tp, fp, fn, tn);
}

}  // namespace adalog
