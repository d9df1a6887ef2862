#include "adalog/detect_eval.hpp"

#include <cmath>
#include <unordered_set>

#include "adalog/error.hpp"
#include "adalog/io.hpp"

namespace adalog {

Verdict classify(const LogRef& ref, double score, const Threshold& t) {
  return {ref, score, t.value, score > t.value ? Label::Anomalous : Label::Normal};
}

Verdict classify(const ScoreReport& report, const Threshold& t) {
  if (report.checkpoint_hash != t.checkpoint_hash) {
    throw Error(ErrorKind::CheckpointMismatch, "score from checkpoint " + report.checkpoint_hash +
                                                   " but threshold from " + t.checkpoint_hash);
  }
  return classify(report.raw_ref, report.score, t);
}

MetricsReport metrics(std::span<const Verdict> verdicts, std::span<const Label> truth) {
  std::vector<Label> predicted;
  predicted.reserve(verdicts.size());
  for (const auto& v : verdicts) predicted.push_back(v.label);
  return confusion_metrics(predicted, truth);
}

std::string format_verdicts(std::span<const Verdict> verdicts) {
  std::string out = "source_id\tline_no\tscore\tthreshold\tlabel\n";
  for (const auto& v : verdicts) {
    out += v.raw_ref.source_id + "\t" + std::to_string(v.raw_ref.line_no) + "\t" +
           format_double(v.score) + "\t" + format_double(v.threshold_value) + "\t" +
           std::string(to_string(v.label)) + "\n";
  }
  return out;
}

std::vector<Verdict> parse_verdicts(std::string_view text) {
  std::vector<Verdict> out;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty() || line.starts_with("source_id\t")) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 5) {
      throw Error(ErrorKind::FormatError,
                  "verdicts line " + std::to_string(line_no) + ": expected 5 columns");
    }
    Verdict v;
    v.raw_ref = {cols[0], parse_u64(cols[1], "line_no")};
    v.score = parse_double(cols[2], "score");
    v.threshold_value = parse_double(cols[3], "threshold");
    v.label = parse_label(cols[4]);
    out.push_back(std::move(v));
  }
  return out;
}

std::string format_metrics(const MetricsReport& m) {
  std::string out;
  out += "tp\t" + std::to_string(m.tp) + "\n";
  out += "fp\t" + std::to_string(m.fp) + "\n";
  out += "fn\t" + std::to_string(m.fn) + "\n";
  out += "tn\t" + std::to_string(m.tn) + "\n";
  out += "precision\t" + format_double(m.precision) + "\n";
  out += "recall\t" + format_double(m.recall) + "\n";
  out += "f1\t" + format_double(m.f1) + "\n";
  out += std::string("precision_undefined\t") + (m.precision_undefined ? "1" : "0") + "\n";
  out += std::string("recall_undefined\t") + (m.recall_undefined ? "1" : "0") + "\n";
  out += std::string("no_anomalies_in_truth\t") + (m.no_anomalies_in_truth ? "1" : "0") + "\n";
  return out;
}

std::vector<Collision> find_leakage(const Split& corpora) {
  std::unordered_set<std::string> train, validation;
  for (const auto& log : corpora.train) train.insert(log.text);
  for (const auto& log : corpora.validation) validation.insert(log.text);
  std::vector<Collision> out;
  for (std::size_t i = 0; i < corpora.test.size(); ++i) {
    const auto& text = corpora.test[i].text;
    if (train.contains(text)) out.push_back({i, "train", text});
    if (validation.contains(text)) out.push_back({i, "validation", text});
  }
  return out;
}

void check_leakage(const Split& corpora) {
  const auto collisions = find_leakage(corpora);
  if (collisions.empty()) return;
  std::string msg = std::to_string(collisions.size()) + " test log(s) also appear in other partitions:";
  for (const auto& c : collisions) {
    msg += "\n  test[" + std::to_string(c.test_index) + "] in " + c.partition + ": " + c.text;
  }
  throw Error(ErrorKind::LeakageDetected, msg);
}

namespace {

std::vector<double> scores_of(std::span<const ScoreReport> reports) {
  std::vector<double> out;
  out.reserve(reports.size());
  for (const auto& r : reports) out.push_back(r.score);
  return out;
}

struct Encoded {
  std::vector<TokenSequence> validation;
  std::vector<TokenSequence> test;
};

Encoded encode_split(const Checkpoint& checkpoint, const Vocabulary& vocab, const Split& corpora) {
  require_vocab(checkpoint, vocab);
  check_leakage(corpora);
  if (corpora.test.size() != corpora.test_labels.size()) {
    throw Error(ErrorKind::LengthMismatch, "test logs and labels differ in length");
  }
  const auto max_len = checkpoint.model_config().max_len;
  return {encode_all(corpora.validation, vocab, max_len), encode_all(corpora.test, vocab, max_len)};
}

}  // namespace

PipelineResult run_pipeline(const Checkpoint& checkpoint, const Vocabulary& vocab,
                            const Split& corpora, const PipelineOptions& options) {
  const auto enc = encode_split(checkpoint, vocab, corpora);
  PipelineResult r;
  r.validation_reports = score_corpus(checkpoint, enc.validation, options.score_options());
  r.threshold = select_threshold(scores_of(r.validation_reports), options.percentile);
  r.threshold.checkpoint_hash = checkpoint.digest();
  r.threshold.vocab_hash = vocab.digest();
  r.threshold.strategy = options.strategy;
  r.threshold.repeats = options.repeats;
  r.test_reports = score_corpus(checkpoint, enc.test, options.score_options());
  for (const auto& rep : r.test_reports) r.verdicts.push_back(classify(rep, r.threshold));
  r.metrics = metrics(r.verdicts, corpora.test_labels);
  return r;
}

MaskingGrid ablate_masking(const Checkpoint& checkpoint, const Vocabulary& vocab,
                           const Split& corpora, std::span<const MaskingStrategy> strategies,
                           std::span<const double> percentiles, const PipelineOptions& options) {
  const auto enc = encode_split(checkpoint, vocab, corpora);
  MaskingGrid grid;
  grid.strategies.assign(strategies.begin(), strategies.end());
  grid.percentiles.assign(percentiles.begin(), percentiles.end());
  for (const auto& strategy : strategies) {
    auto opts = options;
    opts.strategy = strategy;
    const auto val = scores_of(score_corpus(checkpoint, enc.validation, opts.score_options()));
    const auto test = scores_of(score_corpus(checkpoint, enc.test, opts.score_options()));
    std::vector<std::pair<double, Label>> labeled;
    for (std::size_t i = 0; i < test.size(); ++i) labeled.emplace_back(test[i], corpora.test_labels[i]);
    for (const auto& row : sweep(val, percentiles, labeled)) {
      grid.cells.push_back({strategy, row.percentile, row.threshold, row.metrics});
    }
  }
  return grid;
}

std::string format_grid(const MaskingGrid& grid) {
  std::string out = "strategy\tpercentile\tthreshold\ttp\tfp\tfn\ttn\tprecision\trecall\tf1\n";
  for (const auto& c : grid.cells) {
    const auto& m = c.metrics;
    out += c.strategy.descriptor() + "\t" + format_double(c.percentile) + "\t" +
           format_double(c.threshold) + "\t" + std::to_string(m.tp) + "\t" + std::to_string(m.fp) +
           "\t" + std::to_string(m.fn) + "\t" + std::to_string(m.tn) + "\t" +
           format_double(m.precision) + "\t" + format_double(m.recall) + "\t" +
           format_double(m.f1) + "\n";
  }
  return out;
}

Checkpoint initial_checkpoint(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                              const std::string& vocab_hash) {
  Checkpoint c;
  c.params = initial_parameters(model_cfg, train_cfg);
  c.vocab_hash = vocab_hash;
  c.train_config = train_cfg;
  return c;
}

FinetuneAblation ablate_finetune(const Checkpoint& initialized, const Checkpoint& trained,
                                 const Vocabulary& vocab, const Split& corpora,
                                 const PipelineOptions& options) {
  auto mean = [](std::span<const ScoreReport> reports) {
    double sum = 0.0;
    for (const auto& r : reports) sum += r.score;
    return sum / static_cast<double>(reports.size());
  };
  FinetuneAblation a;
  const auto before = run_pipeline(initialized, vocab, corpora, options);
  const auto after = run_pipeline(trained, vocab, corpora, options);
  a.initialized = before.metrics;
  a.trained = after.metrics;
  a.initialized_mean_normal_score = mean(before.validation_reports);
  a.trained_mean_normal_score = mean(after.validation_reports);
  a.ln_vocab_size = std::log(static_cast<double>(vocab.size()));
  return a;
}

FinetuneAblation ablate_finetune(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                 const Vocabulary& vocab, const Split& corpora,
                                 const PipelineOptions& options) {
  const auto max_len = model_cfg.max_len;
  const auto train_seqs = encode_all(corpora.train, vocab, max_len);
  const auto trained = train(train_seqs, model_cfg, train_cfg, vocab.digest());
  return ablate_finetune(initial_checkpoint(model_cfg, train_cfg, vocab.digest()), trained, vocab,
                         corpora, options);
}

std::string format_finetune(const FinetuneAblation& a) {
  auto row = [](const std::string& name, const MetricsReport& m, double mean_score) {
    return name + "\t" + std::to_string(m.tp) + "\t" + std::to_string(m.fp) + "\t" +
           std::to_string(m.fn) + "\t" + std::to_string(m.tn) + "\t" + format_double(m.precision) +
           "\t" + format_double(m.recall) + "\t" + format_double(m.f1) + "\t" +
           format_double(mean_score) + "\n";
  };
  std::string out = "model\ttp\tfp\tfn\ttn\tprecision\trecall\tf1\tmean_normal_score\n";
  out += row("initialized", a.initialized, a.initialized_mean_normal_score);
  out += row("trained", a.trained, a.trained_mean_normal_score);
  out += "# ln(vocab_size)=" + format_double(a.ln_vocab_size) + "\n";
  return out;
}

}  // namespace adalog
