#include "adalog/score.hpp"

#include <algorithm>
#include <cmath>

#include "adalog/error.hpp"
#include "adalog/io.hpp"
#include "adalog/parallel.hpp"
#include "adalog/rng.hpp"

namespace adalog {

double score_from_probs(std::span<const TokenProb> probs) {
  if (probs.empty()) throw Error(ErrorKind::NoMaskedPositions, "no token probabilities to score");
  double sum = 0.0;
  for (const auto& tp : probs) sum -= std::log(tp.p);
  return sum / static_cast<double>(probs.size());
}

void require_vocab(const Checkpoint& checkpoint, const Vocabulary& vocab) {
  if (vocab.digest() != checkpoint.vocab_hash || vocab.size() != checkpoint.model_config().vocab_size) {
    throw Error(ErrorKind::VocabMismatch, "vocabulary " + vocab.digest() +
                                              " does not match checkpoint vocabulary " +
                                              checkpoint.vocab_hash);
  }
}

namespace {

std::vector<MaskPlan> make_plans(const TokenSequence& seq, const MaskingStrategy& strategy,
                                 std::uint64_t seed, std::size_t repeats) {
  if (seq.length < 1) throw Error(ErrorKind::ShapeMismatch, "cannot score an empty sequence");
  if (strategy.kind == MaskKind::TokenByToken) return plan_token_by_token(seq);
  std::vector<MaskPlan> plans;
  plans.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    plans.push_back(plan_random(seq, strategy.fraction, derive_seed(seed, {stream_tag("plan"), r})));
  }
  return plans;
}

ScoreReport assemble(const TokenSequence& seq, const MaskingStrategy& strategy,
                     std::size_t repeats, const std::vector<MaskPlan>& plans,
                     const std::vector<std::vector<double>>& log_probs,
                     const std::string& checkpoint_hash) {
  ScoreReport report;
  report.raw_ref = seq.raw_ref;
  report.strategy = strategy;
  report.repeats = strategy.kind == MaskKind::TokenByToken ? 1 : repeats;
  report.checkpoint_hash = checkpoint_hash;
  report.masked_count = strategy.kind == MaskKind::TokenByToken
                            ? seq.length
                            : plans.front().masked_indices.size();
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const auto& idx = plans[k].masked_indices;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      report.token_probs.push_back({idx[j], std::max(kProbabilityFloor, std::exp(log_probs[k][j]))});
    }
  }
  report.score = score_from_probs(report.token_probs);
  return report;
}

}  // namespace

ScoreReport score_log(const Checkpoint& checkpoint, const TokenSequence& seq,
                      const MaskingStrategy& strategy, std::uint64_t seed, std::size_t repeats) {
  strategy.validate();
  if (repeats < 1) throw Error(ErrorKind::InvalidArgument, "repeats must be >= 1");
  const auto plans = make_plans(seq, strategy, seed, repeats);
  std::vector<std::vector<double>> lp;
  lp.reserve(plans.size());
  for (const auto& plan : plans) {
    lp.push_back(masked_log_probs(checkpoint.params, plan.masked_sequence, plan.targets()));
  }
  return assemble(seq, strategy, repeats, plans, lp, checkpoint.digest());
}

std::vector<ScoreReport> score_corpus(const Checkpoint& checkpoint,
                                      std::span<const TokenSequence> corpus,
                                      const ScoreOptions& options) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "nothing to score");
  options.strategy.validate();
  if (options.repeats < 1) throw Error(ErrorKind::InvalidArgument, "repeats must be >= 1");
  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
  const std::string hash = checkpoint.digest();

  std::vector<std::vector<MaskPlan>> plans(corpus.size());
  std::vector<std::pair<std::size_t, std::size_t>> units;  // (log, plan)
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    plans[i] = make_plans(corpus[i], options.strategy, derive_seed(options.seed, {i}),
                          options.repeats);
    for (std::size_t k = 0; k < plans[i].size(); ++k) units.emplace_back(i, k);
  }
  std::vector<std::vector<std::vector<double>>> lp(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) lp[i].resize(plans[i].size());

  const std::size_t chunks = (units.size() + batch_size - 1) / batch_size;
  parallel_for(chunks, options.threads, [&](std::size_t c) {
    const std::size_t begin = c * batch_size;
    const std::size_t end = std::min(units.size(), begin + batch_size);
    std::vector<TokenSequence> batch;
    std::vector<MaskedTargets> targets;
    for (std::size_t u = begin; u < end; ++u) {
      const auto& plan = plans[units[u].first][units[u].second];
      batch.push_back(plan.masked_sequence);
      targets.push_back(plan.targets());
    }
    auto out = masked_log_probs_batch(checkpoint.params, batch, targets);
    for (std::size_t u = begin; u < end; ++u) {
      lp[units[u].first][units[u].second] = std::move(out[u - begin]);
    }
  });

  std::vector<ScoreReport> reports;
  reports.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    reports.push_back(assemble(corpus[i], options.strategy, options.repeats, plans[i], lp[i], hash));
  }
  return reports;
}

HeatmapMatrix heatmap_from_reports(std::span<const ScoreReport> token_reports) {
  HeatmapMatrix m;
  for (const auto& r : token_reports) {
    if (r.strategy.kind != MaskKind::TokenByToken) {
      throw Error(ErrorKind::InvalidArgument, "heatmaps need token-by-token reports");
    }
    m.columns = std::max(m.columns, r.masked_count);
  }
  for (const auto& r : token_reports) {
    m.rows.push_back(r.raw_ref);
    std::vector<std::optional<double>> row(m.columns);
    for (const auto& tp : r.token_probs) row[tp.position] = tp.p;
    m.cells.push_back(std::move(row));
  }
  return m;
}

HeatmapMatrix heatmap(const Checkpoint& checkpoint, std::span<const TokenSequence> corpus,
                      std::size_t threads, std::size_t batch_size) {
  ScoreOptions opts;
  opts.strategy = MaskingStrategy::token_by_token();
  opts.threads = threads;
  opts.batch_size = batch_size;
  const auto reports = score_corpus(checkpoint, corpus, opts);
  return heatmap_from_reports(reports);
}

HeatmapSummary summarize(const HeatmapMatrix& matrix, std::span<const Label> labels) {
  if (labels.size() != matrix.rows.size()) {
    throw Error(ErrorKind::LengthMismatch, "heatmap has " + std::to_string(matrix.rows.size()) +
                                               " rows but " + std::to_string(labels.size()) +
                                               " labels");
  }
  struct Acc {
    std::vector<double> sum;
    std::vector<std::size_t> n;
    double total = 0.0;
    std::size_t count = 0;
  };
  Acc acc[2];
  for (auto& a : acc) {
    a.sum.assign(matrix.columns, 0.0);
    a.n.assign(matrix.columns, 0);
  }
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    auto& a = acc[static_cast<int>(labels[i])];
    for (std::size_t c = 0; c < matrix.columns; ++c) {
      if (!matrix.cells[i][c]) continue;
      a.sum[c] += *matrix.cells[i][c];
      ++a.n[c];
      a.total += *matrix.cells[i][c];
      ++a.count;
    }
  }
  auto means = [&](const Acc& a) {
    std::vector<std::optional<double>> out(matrix.columns);
    for (std::size_t c = 0; c < matrix.columns; ++c) {
      if (a.n[c]) out[c] = a.sum[c] / static_cast<double>(a.n[c]);
    }
    return out;
  };
  HeatmapSummary s;
  s.normal_by_position = means(acc[0]);
  s.anomalous_by_position = means(acc[1]);
  if (acc[0].count) s.normal_mean = acc[0].total / static_cast<double>(acc[0].count);
  if (acc[1].count) s.anomalous_mean = acc[1].total / static_cast<double>(acc[1].count);
  return s;
}

std::string format_scores(std::span<const ScoreReport> reports, const std::string& vocab_hash) {
  std::string out;
  const std::string ckpt = reports.empty() ? "" : reports.front().checkpoint_hash;
  const std::size_t repeats = reports.empty() ? 1 : reports.front().repeats;
  out += "#checkpoint=" + ckpt + "\n";
  out += "#vocab=" + vocab_hash + "\n";
  out += "#repeats=" + std::to_string(repeats) + "\n";
  out += "source_id\tline_no\tscore\tmasked_count\tstrategy\n";
  for (const auto& r : reports) {
    out += r.raw_ref.source_id + "\t" + std::to_string(r.raw_ref.line_no) + "\t" +
           format_double(r.score) + "\t" + std::to_string(r.masked_count) + "\t" +
           r.strategy.descriptor() + "\n";
  }
  return out;
}

ScoresFile parse_scores(std::string_view text) {
  ScoresFile file;
  bool header_seen = false;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const auto key = line.substr(1, eq - 1);
      const auto value = line.substr(eq + 1);
      if (key == "checkpoint") file.checkpoint_hash = value;
      if (key == "vocab") file.vocab_hash = value;
      if (key == "repeats") file.repeats = parse_u64(value, "repeats");
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (line.starts_with("source_id\t")) continue;
    }
    const auto cols = split(line, '\t');
    if (cols.size() != 5) {
      throw Error(ErrorKind::FormatError,
                  "scores line " + std::to_string(line_no) + ": expected 5 columns");
    }
    ScoreRow row;
    row.raw_ref = {cols[0], parse_u64(cols[1], "line_no")};
    row.score = parse_double(cols[2], "score");
    row.masked_count = parse_u64(cols[3], "masked_count");
    row.strategy = MaskingStrategy::parse(cols[4]);
    file.rows.push_back(std::move(row));
  }
  return file;
}

std::string format_heatmap(const HeatmapMatrix& matrix) {
  std::string out = "source_id\tline_no";
  for (std::size_t c = 1; c <= matrix.columns; ++c) out += "\t" + std::to_string(c);
  out += "\n";
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    out += matrix.rows[i].source_id + "\t" + std::to_string(matrix.rows[i].line_no);
    for (const auto& cell : matrix.cells[i]) {
      out += "\t";
      out += cell ? format_double(*cell) : "NA";
    }
    out += "\n";
  }
  return out;
}

}  // namespace adalog
