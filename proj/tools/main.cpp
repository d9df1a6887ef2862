// adalog command-line driver. Every command writes its artifacts plus a
// <output>.manifest.json that `adalog rerun` replays.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "adalog/calibrate.hpp"
#include "adalog/config.hpp"
#include "adalog/corpus.hpp"
#include "adalog/detect_eval.hpp"
#include "adalog/digest.hpp"
#include "adalog/error.hpp"
#include "adalog/io.hpp"
#include "adalog/normalize.hpp"
#include "adalog/parallel.hpp"
#include "adalog/score.hpp"
#include "adalog/tokenize.hpp"
#include "adalog/train.hpp"

namespace fs = std::filesystem;
using namespace adalog;

namespace {

/// Flags shared by every command; unset optionals leave the config untouched.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> min_freq, max_vocab;
  std::optional<std::size_t> epochs, batch_size, warmup, shards;
  std::optional<double> mask_fraction, lr, weight_decay, grad_clip;
  std::optional<std::string> mask_strategy;
  std::optional<std::size_t> repeats, score_batch;
  std::optional<double> percentile;
  std::optional<std::size_t> templates, n_normal, n_anomalies;
  std::optional<std::size_t> d_model, n_heads, n_layers, d_ff, max_len;
  std::optional<double> dropout;
};

struct Run {
  std::string command;
  std::vector<std::string> args;
  Overrides ov;
  RunConfig cfg;
  RunManifest manifest;
  fs::path manifest_path;

  void input(const fs::path& p, const std::string& field) {
    if (!fs::exists(p)) throw Error(ErrorKind::MissingInput, field + ": no such file: " + p.string());
    manifest.inputs[p.string()] = file_sha256_hex(p);
  }
  void output(const fs::path& p, std::string_view content) {
    write_file(p, content);
    manifest.outputs[p.string()] = sha256_hex(content);
    if (manifest_path.empty()) manifest_path = p.string() + ".manifest.json";
  }
  std::size_t threads() const { return resolve_threads(cfg.threads); }
};

template <typename T>
void flag(CLI::App* cmd, const std::string& name, std::optional<T>& target, const std::string& help) {
  cmd->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

void common_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path, "JSON config file");
  flag(cmd, "--seed", ov.seed, "top-level seed");
  flag(cmd, "--threads", ov.threads, "worker cap, 0 = all hardware threads");
}

void model_flags(CLI::App* cmd, Overrides& ov) {
  flag(cmd, "--epochs", ov.epochs, "training epochs");
  flag(cmd, "--batch-size", ov.batch_size, "training batch size");
  flag(cmd, "--lr", ov.lr, "learning rate");
  flag(cmd, "--weight-decay", ov.weight_decay, "decoupled weight decay");
  flag(cmd, "--grad-clip", ov.grad_clip, "global gradient norm clip, <= 0 disables");
  flag(cmd, "--warmup", ov.warmup, "linear warmup steps");
  flag(cmd, "--grad-shards", ov.shards, "fixed gradient reduction shards");
  flag(cmd, "--d-model", ov.d_model, "model width");
  flag(cmd, "--heads", ov.n_heads, "attention heads");
  flag(cmd, "--layers", ov.n_layers, "encoder layers");
  flag(cmd, "--d-ff", ov.d_ff, "feed-forward width");
  flag(cmd, "--max-len", ov.max_len, "maximum sequence length");
  flag(cmd, "--dropout", ov.dropout, "dropout rate");
}

void scoring_flags(CLI::App* cmd, Overrides& ov) {
  flag(cmd, "--mask-strategy", ov.mask_strategy, "token or random");
  flag(cmd, "--mask-fraction", ov.mask_fraction, "fraction masked by the random strategy");
  flag(cmd, "--repeats", ov.repeats, "random mask draws per log");
  flag(cmd, "--score-batch", ov.score_batch, "masked sequences per forward pass");
}

RunConfig effective_config(const Overrides& ov, bool training) {
  RunConfig cfg;
  if (!ov.config_path.empty()) {
    if (!fs::exists(ov.config_path)) {
      throw Error(ErrorKind::MissingInput, "--config: no such file: " + ov.config_path);
    }
    cfg = load_config(ov.config_path, cfg);
  }
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.threads) cfg.threads = *ov.threads;
  if (ov.min_freq) cfg.min_freq = *ov.min_freq;
  if (ov.max_vocab) cfg.max_vocab = *ov.max_vocab;
  if (ov.epochs) cfg.train.epochs = *ov.epochs;
  if (ov.batch_size) cfg.train.batch_size = *ov.batch_size;
  if (ov.lr) cfg.train.learning_rate = *ov.lr;
  if (ov.weight_decay) cfg.train.weight_decay = *ov.weight_decay;
  if (ov.grad_clip) {
    if (*ov.grad_clip > 0) cfg.train.grad_clip = *ov.grad_clip;
    else cfg.train.grad_clip.reset();
  }
  if (ov.warmup) cfg.train.warmup_steps = *ov.warmup;
  if (ov.shards) cfg.train.grad_shards = *ov.shards;
  if (ov.d_model) cfg.model.d_model = *ov.d_model;
  if (ov.n_heads) cfg.model.n_heads = *ov.n_heads;
  if (ov.n_layers) cfg.model.n_layers = *ov.n_layers;
  if (ov.d_ff) cfg.model.d_ff = *ov.d_ff;
  if (ov.max_len) cfg.model.max_len = *ov.max_len;
  if (ov.dropout) cfg.model.dropout_rate = *ov.dropout;
  if (training) {
    if (ov.mask_fraction) cfg.train.mask_fraction = *ov.mask_fraction;
  } else {
    if (ov.mask_strategy) {
      if (*ov.mask_strategy == "token") {
        cfg.strategy = MaskingStrategy::token_by_token();
      } else if (*ov.mask_strategy == "random") {
        cfg.strategy = MaskingStrategy::random(cfg.strategy.kind == MaskKind::RandomFraction
                                                   ? cfg.strategy.fraction
                                                   : 0.15);
      } else {
        throw Error(ErrorKind::ConfigInvalid, "--mask-strategy: expected token or random, got " +
                                                  *ov.mask_strategy);
      }
    }
    if (ov.mask_fraction) {
      if (cfg.strategy.kind != MaskKind::RandomFraction) {
        throw Error(ErrorKind::ConfigInvalid, "--mask-fraction: only valid with the random strategy");
      }
      cfg.strategy.fraction = *ov.mask_fraction;
    }
  }
  if (ov.repeats) cfg.repeats = *ov.repeats;
  if (ov.score_batch) cfg.score_batch_size = *ov.score_batch;
  if (ov.percentile) cfg.percentile = *ov.percentile;
  if (ov.templates) cfg.synth.n_templates = *ov.templates;
  if (ov.n_normal) cfg.synth.n_normal = *ov.n_normal;
  if (ov.n_anomalies) cfg.synth.n_anomalies = *ov.n_anomalies;
  cfg.synth.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  cfg.train.threads = resolve_threads(cfg.threads);
  cfg.validate();
  return cfg;
}

Vocabulary load_vocab(Run& run, const fs::path& p) {
  run.input(p, "--vocab");
  auto v = Vocabulary::load(p);
  run.manifest.digests["vocab"] = v.digest();
  return v;
}

Checkpoint load_ckpt(Run& run, const fs::path& p, const Vocabulary& vocab) {
  run.input(p, "--checkpoint");
  auto c = load_checkpoint(p);
  require_vocab(c, vocab);
  run.manifest.digests["checkpoint"] = c.digest();
  return c;
}

CleanCorpus load_clean(Run& run, const fs::path& p, const std::string& field) {
  run.input(p, field);
  return parse_clean(read_file(p));
}

std::vector<double> parse_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    try {
      out.push_back(parse_double(item, field));
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigInvalid, e.what());
    }
  }
  return out;
}

std::vector<Label> load_truth(Run& run, const fs::path& p) {
  run.input(p, "--labels");
  const auto text = read_file(p);
  if (text.find('\t') != std::string::npos) return parse_clean(text).require_labels();
  std::vector<Label> out;
  for (const auto& line : read_lines(p)) {
    if (!line.empty()) out.push_back(parse_label(line));
  }
  return out;
}

struct Paths {
  std::string in, out, labels, labels_out, report, vocab, checkpoint, scores, threshold, verdicts,
      split_dir, test_scores, sweep_out, manifest, strategies = "token,0.15,0.25,0.5",
      percentiles = "70,75,80,85,90,95,100";
  bool inline_format = false;
};

// --- commands -------------------------------------------------------------

void cmd_synth(Run& run, const Paths& p) {
  const auto corpus = synthesize(run.cfg.synth);
  std::string logs, labels;
  for (std::size_t i = 0; i < corpus.logs.size(); ++i) {
    logs += corpus.logs[i].text + "\n";
    labels += corpus.labels[i] == Label::Anomalous ? "1\n" : "0\n";
  }
  run.output(p.out, logs);
  if (!p.labels_out.empty()) run.output(p.labels_out, labels);
}

void cmd_clean(Run& run, const Paths& p) {
  LabeledCorpus corpus;
  bool labeled = true;
  run.input(p.in, "--in");
  if (!p.labels.empty()) {
    run.input(p.labels, "--labels");
    corpus = load_parallel(p.in, p.labels);
  } else if (p.inline_format) {
    corpus = load_inline(p.in);
  } else {
    corpus.logs = load_raw(p.in);
    labeled = false;
  }
  const Normalizer norm;
  std::vector<CleanLog> kept;
  std::vector<Label> labels;
  ReplacementCounts counts;
  nlohmann::ordered_json dropped = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < corpus.logs.size(); ++i) {
    try {
      kept.push_back(norm.normalize(corpus.logs[i], &counts));
      if (labeled) labels.push_back(corpus.labels[i]);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyAfterCleaning) throw;
      dropped.push_back(corpus.logs[i].line_no);
    }
  }
  run.output(p.out, format_clean(kept, labels));
  nlohmann::ordered_json report;
  report["input_lines"] = corpus.logs.size();
  report["kept"] = kept.size();
  report["dropped_line_numbers"] = dropped;
  report["replacements"] = {{"timestamps", counts.timestamps},
                            {"paths", counts.paths},
                            {"addresses", counts.addresses},
                            {"numbers", counts.numbers}};
  run.output(p.report.empty() ? p.out + ".report.json" : p.report, report.dump(2) + "\n");
}

void cmd_split(Run& run, const Paths& p) {
  const auto corpus = load_clean(run, p.in, "--in");
  std::vector<CleanLog> normals, anomalies;
  for (std::size_t i = 0; i < corpus.logs.size(); ++i) {
    const bool anomalous = corpus.labels[i] && *corpus.labels[i] == Label::Anomalous;
    (anomalous ? anomalies : normals).push_back(corpus.logs[i]);
  }
  const auto unique = dedupe(normals);
  const auto s = split(unique.unique, anomalies, run.cfg.seed);
  const fs::path dir = p.out;
  run.manifest_path = dir / "split.manifest.json";
  run.output(dir / "train.tsv", format_clean(s.train));
  run.output(dir / "validation.tsv", format_clean(s.validation));
  run.output(dir / "test.tsv", format_clean(s.test, s.test_labels));
  std::string mult = "source_id\tline_no\tmultiplicity\n";
  for (std::size_t i = 0; i < unique.unique.size(); ++i) {
    mult += unique.unique[i].raw_ref.source_id + "\t" +
            std::to_string(unique.unique[i].raw_ref.line_no) + "\t" +
            std::to_string(unique.multiplicity[i]) + "\n";
  }
  run.output(dir / "multiplicity.tsv", mult);
}

void cmd_build_vocab(Run& run, const Paths& p) {
  const auto corpus = load_clean(run, p.in, "--in");
  const auto vocab = build_vocab(corpus.logs, run.cfg.min_freq, run.cfg.max_vocab);
  run.output(p.out, vocab.serialize());
  run.manifest.digests["vocab"] = vocab.digest();
}

void cmd_train(Run& run, const Paths& p) {
  const auto corpus = load_clean(run, p.in, "--in");
  const auto vocab = load_vocab(run, p.vocab);
  auto mc = run.cfg.model;
  mc.vocab_size = vocab.size();
  const auto seqs = encode_all(corpus.logs, vocab, mc.max_len);
  std::string log;
  const auto ckpt = train(seqs, mc, run.cfg.train, vocab.digest(), [&](const EpochReport& r) {
    const std::string line = "epoch=" + std::to_string(r.epoch) + " mean_loss=" +
                             format_double(r.mean_loss) + " wall_seconds=" +
                             format_double(r.wall_seconds);
    std::cerr << line << "\n";
    log += line + "\n";
  });
  run.output(p.out, serialize_checkpoint(ckpt));
  write_file(p.out + ".log", log);
  run.manifest.digests["checkpoint"] = ckpt.digest();
}

void cmd_score(Run& run, const Paths& p) {
  const auto corpus = load_clean(run, p.in, "--in");
  const auto vocab = load_vocab(run, p.vocab);
  const auto ckpt = load_ckpt(run, p.checkpoint, vocab);
  const auto seqs = encode_all(corpus.logs, vocab, ckpt.model_config().max_len);
  const ScoreOptions opts{run.cfg.strategy, run.cfg.seed, run.cfg.repeats, run.threads(),
                          run.cfg.score_batch_size};
  const auto reports = score_corpus(ckpt, seqs, opts);
  run.output(p.out, format_scores(reports, vocab.digest()));
}

void cmd_calibrate(Run& run, const Paths& p) {
  run.input(p.scores, "--scores");
  const auto file = parse_scores(read_file(p.scores));
  if (file.rows.empty()) throw Error(ErrorKind::EmptyScores, "--scores: file has no rows");
  std::vector<double> scores;
  for (const auto& r : file.rows) scores.push_back(r.score);
  auto t = select_threshold(scores, run.cfg.percentile);
  t.checkpoint_hash = file.checkpoint_hash;
  t.vocab_hash = file.vocab_hash;
  t.strategy = file.rows.front().strategy;
  t.repeats = file.repeats;
  const auto json = threshold_to_json(t);
  run.output(p.out, json);
  run.manifest.digests["threshold"] = sha256_hex(json);

  if (!p.test_scores.empty()) {
    run.input(p.test_scores, "--test-scores");
    const auto test = parse_scores(read_file(p.test_scores));
    if (test.checkpoint_hash != file.checkpoint_hash) {
      throw Error(ErrorKind::DigestMismatch, "--test-scores: checkpoint digest differs from --scores");
    }
    const auto truth = load_truth(run, p.labels);
    if (truth.size() != test.rows.size()) {
      throw Error(ErrorKind::LengthMismatch, "--labels: " + std::to_string(truth.size()) +
                                                 " labels for " + std::to_string(test.rows.size()) +
                                                 " scores");
    }
    std::vector<std::pair<double, Label>> labeled;
    for (std::size_t i = 0; i < truth.size(); ++i) labeled.emplace_back(test.rows[i].score, truth[i]);
    const auto pct = parse_list(p.percentiles, "--percentiles");
    const auto rows = sweep(scores, pct, labeled);
    run.output(p.sweep_out.empty() ? p.out + ".sweep.tsv" : p.sweep_out, format_sweep(rows));
  }
}

void cmd_detect(Run& run, const Paths& p) {
  run.input(p.scores, "--scores");
  run.input(p.threshold, "--threshold");
  const auto file = parse_scores(read_file(p.scores));
  const auto threshold_text = read_file(p.threshold);
  const auto t = threshold_from_json(threshold_text);
  run.manifest.digests["threshold"] = sha256_hex(threshold_text);
  if (file.checkpoint_hash != t.checkpoint_hash) {
    throw Error(ErrorKind::DigestMismatch, "--threshold: checkpoint digest " + t.checkpoint_hash +
                                               " differs from the scores' " + file.checkpoint_hash);
  }
  if (file.vocab_hash != t.vocab_hash) {
    throw Error(ErrorKind::DigestMismatch, "--threshold: vocab digest " + t.vocab_hash +
                                               " differs from the scores' " + file.vocab_hash);
  }
  if (!p.vocab.empty()) {
    const auto vocab = load_vocab(run, p.vocab);
    if (vocab.digest() != t.vocab_hash) {
      throw Error(ErrorKind::DigestMismatch, "--vocab: digest differs from the threshold's");
    }
  }
  if (!p.checkpoint.empty()) {
    run.input(p.checkpoint, "--checkpoint");
    const auto c = load_checkpoint(p.checkpoint);
    if (c.digest() != t.checkpoint_hash) {
      throw Error(ErrorKind::DigestMismatch, "--checkpoint: digest differs from the threshold's");
    }
  }
  std::vector<Verdict> verdicts;
  for (const auto& row : file.rows) {
    if (!(row.strategy == t.strategy)) {
      throw Error(ErrorKind::DigestMismatch, "--scores: strategy " + row.strategy.descriptor() +
                                                 " differs from the threshold's " +
                                                 t.strategy.descriptor());
    }
    verdicts.push_back(classify(row.raw_ref, row.score, t));
  }
  run.output(p.out, format_verdicts(verdicts));
}

void cmd_eval(Run& run, const Paths& p) {
  run.input(p.verdicts, "--verdicts");
  const auto verdicts = parse_verdicts(read_file(p.verdicts));
  const auto truth = load_truth(run, p.labels);
  const auto m = metrics(verdicts, truth);
  if (m.no_anomalies_in_truth) std::cerr << "warning: NoAnomaliesInTruth: labels contain no anomaly\n";
  run.output(p.out, format_metrics(m));
}

Split load_split_dir(Run& run, const fs::path& dir) {
  for (const char* name : {"train.tsv", "validation.tsv", "test.tsv"}) {
    run.input(dir / name, "--split-dir");
  }
  return load_split(dir);
}

PipelineOptions pipeline_options(const Run& run) {
  PipelineOptions o;
  o.strategy = run.cfg.strategy;
  o.percentile = run.cfg.percentile;
  o.seed = run.cfg.seed;
  o.repeats = run.cfg.repeats;
  o.threads = run.threads();
  o.batch_size = run.cfg.score_batch_size;
  return o;
}

void cmd_ablate_masking(Run& run, const Paths& p) {
  const auto corpora = load_split_dir(run, p.split_dir);
  const auto vocab = load_vocab(run, p.vocab);
  const auto ckpt = load_ckpt(run, p.checkpoint, vocab);
  std::vector<MaskingStrategy> strategies;
  for (const auto& s : split(p.strategies, ',')) {
    try {
      strategies.push_back(MaskingStrategy::parse(s));
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigInvalid, std::string("--strategies: ") + e.what());
    }
  }
  const auto pct = parse_list(p.percentiles, "--percentiles");
  const auto grid = ablate_masking(ckpt, vocab, corpora, strategies, pct, pipeline_options(run));
  run.output(p.out, format_grid(grid));
}

void cmd_ablate_finetune(Run& run, const Paths& p) {
  const auto corpora = load_split_dir(run, p.split_dir);
  const auto vocab = load_vocab(run, p.vocab);
  FinetuneAblation a;
  if (!p.checkpoint.empty()) {
    const auto trained = load_ckpt(run, p.checkpoint, vocab);
    const auto init = initial_checkpoint(trained.model_config(), trained.train_config, vocab.digest());
    a = ablate_finetune(init, trained, vocab, corpora, pipeline_options(run));
  } else {
    auto mc = run.cfg.model;
    mc.vocab_size = vocab.size();
    a = ablate_finetune(mc, run.cfg.train, vocab, corpora, pipeline_options(run));
  }
  run.output(p.out, format_finetune(a));
}

void cmd_heatmap(Run& run, const Paths& p) {
  const auto corpus = load_clean(run, p.in, "--in");
  const auto vocab = load_vocab(run, p.vocab);
  const auto ckpt = load_ckpt(run, p.checkpoint, vocab);
  const auto seqs = encode_all(corpus.logs, vocab, ckpt.model_config().max_len);
  const auto m = heatmap(ckpt, seqs, run.threads(), run.cfg.score_batch_size);
  run.output(p.out, format_heatmap(m));
  std::string rows = "row\tsource_id\tline_no\tlabel\n";
  bool labeled = true;
  for (std::size_t i = 0; i < corpus.logs.size(); ++i) {
    const auto& l = corpus.labels[i];
    labeled = labeled && l.has_value();
    rows += std::to_string(i + 1) + "\t" + corpus.logs[i].raw_ref.source_id + "\t" +
            std::to_string(corpus.logs[i].raw_ref.line_no) + "\t" +
            (l ? std::string(to_string(*l)) : "-") + "\n";
  }
  run.output(p.out + ".rows.tsv", rows);
  if (labeled) {
    const auto s = summarize(m, corpus.require_labels());
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
    std::string out = "subset\tall";
    for (std::size_t c = 1; c <= m.columns; ++c) out += "\t" + std::to_string(c);
    out += "\nnormal\t" + cell(s.normal_mean);
    for (const auto& v : s.normal_by_position) out += "\t" + cell(v);
    out += "\nanomalous\t" + cell(s.anomalous_mean);
    for (const auto& v : s.anomalous_by_position) out += "\t" + cell(v);
    out += "\n";
    run.output(p.out + ".summary.tsv", out);
  }
}

int dispatch(std::vector<std::string> args);

void cmd_rerun(const Paths& p, const Overrides& ov) {
  if (!fs::exists(p.manifest)) throw Error(ErrorKind::MissingInput, "--manifest: no such file: " + p.manifest);
  const auto m = RunManifest::from_json(nlohmann::json::parse(read_file(p.manifest)));
  for (const auto& [path, digest] : m.inputs) {
    if (!fs::exists(path)) throw Error(ErrorKind::MissingInput, "manifest input missing: " + path);
    if (file_sha256_hex(path) != digest) {
      throw Error(ErrorKind::DigestMismatch, "manifest input changed since the run: " + path);
    }
  }
  std::vector<std::string> args = m.args;
  if (ov.threads) {
    auto it = std::find(args.begin(), args.end(), "--threads");
    if (it != args.end() && it + 1 != args.end()) {
      *(it + 1) = std::to_string(*ov.threads);
    } else {
      args.push_back("--threads");
      args.push_back(std::to_string(*ov.threads));
    }
  }
  if (const int rc = dispatch(args); rc != 0) {
    throw Error(ErrorKind::InvalidArgument, "replayed command failed with status " + std::to_string(rc));
  }
}

int dispatch(std::vector<std::string> args) {
  CLI::App app{"adalog: masked-language-model log anomaly detection"};
  app.require_subcommand(1);
  Overrides ov;
  Paths p;

  auto add = [&](const std::string& name, const std::string& help) {
    auto* c = app.add_subcommand(name, help);
    common_flags(c, ov);
    return c;
  };

  auto* synth = add("synth", "generate the synthetic labeled log corpus");
  synth->add_option("--out", p.out, "raw log file")->required();
  synth->add_option("--labels-out", p.labels_out, "parallel 0/1 label file");
  flag(synth, "--templates", ov.templates, "normal templates");
  flag(synth, "--normal", ov.n_normal, "normal logs");
  flag(synth, "--anomalies", ov.n_anomalies, "anomalous logs");

  auto* clean = add("clean", "normalize raw logs");
  clean->add_option("--in", p.in, "raw log file")->required();
  clean->add_option("--labels", p.labels, "parallel 0/1 label file");
  clean->add_flag("--inline", p.inline_format, "input lines are label<TAB>text");
  clean->add_option("--out", p.out, "cleaned-log file")->required();
  clean->add_option("--report", p.report, "cleaning report (default <out>.report.json)");

  auto* split_cmd = add("split", "deduplicate normals and split 70/15/15");
  split_cmd->add_option("--in", p.in, "cleaned-log file")->required();
  split_cmd->add_option("--out", p.out, "output directory")->required();

  auto* vocab = add("build-vocab", "build the vocabulary");
  vocab->add_option("--in", p.in, "cleaned-log file")->required();
  vocab->add_option("--out", p.out, "vocabulary file")->required();
  flag(vocab, "--min-freq", ov.min_freq, "minimum token frequency");
  flag(vocab, "--max-size", ov.max_vocab, "maximum vocabulary size");

  auto* train_cmd = add("train", "train the encoder with masked language modeling");
  train_cmd->add_option("--in", p.in, "cleaned training logs")->required();
  train_cmd->add_option("--vocab", p.vocab, "vocabulary file")->required();
  train_cmd->add_option("--out", p.out, "checkpoint file")->required();
  model_flags(train_cmd, ov);
  flag(train_cmd, "--mask-fraction", ov.mask_fraction, "training mask fraction");

  auto* score = add("score", "score logs");
  score->add_option("--in", p.in, "cleaned-log file")->required();
  score->add_option("--vocab", p.vocab, "vocabulary file")->required();
  score->add_option("--checkpoint", p.checkpoint, "checkpoint file")->required();
  score->add_option("--out", p.out, "scores file")->required();
  scoring_flags(score, ov);

  auto* calibrate = add("calibrate", "select the threshold from normal-log scores");
  calibrate->add_option("--scores", p.scores, "validation scores file")->required();
  calibrate->add_option("--out", p.out, "threshold file")->required();
  flag(calibrate, "--percentile", ov.percentile, "quantile in (0, 100]");
  calibrate->add_option("--test-scores", p.test_scores, "labeled test scores for a sweep");
  calibrate->add_option("--labels", p.labels, "labels of the test scores");
  calibrate->add_option("--percentiles", p.percentiles, "sweep percentiles, comma-separated");
  calibrate->add_option("--sweep-out", p.sweep_out, "sweep table (default <out>.sweep.tsv)");

  auto* detect = add("detect", "classify scores against a threshold");
  detect->add_option("--scores", p.scores, "scores file")->required();
  detect->add_option("--threshold", p.threshold, "threshold file")->required();
  detect->add_option("--out", p.out, "verdicts file")->required();
  detect->add_option("--vocab", p.vocab, "vocabulary file to cross-check");
  detect->add_option("--checkpoint", p.checkpoint, "checkpoint file to cross-check");

  auto* eval = add("eval", "precision, recall and F1 of verdicts");
  eval->add_option("--verdicts", p.verdicts, "verdicts file")->required();
  eval->add_option("--labels", p.labels, "cleaned-log file or 0/1 label file")->required();
  eval->add_option("--out", p.out, "metrics file")->required();

  auto* am = add("ablate-masking", "strategy x percentile grid");
  am->add_option("--split-dir", p.split_dir, "directory written by split")->required();
  am->add_option("--vocab", p.vocab, "vocabulary file")->required();
  am->add_option("--checkpoint", p.checkpoint, "checkpoint file")->required();
  am->add_option("--out", p.out, "grid file")->required();
  am->add_option("--strategies", p.strategies, "comma-separated strategies");
  am->add_option("--percentiles", p.percentiles, "comma-separated percentiles");
  scoring_flags(am, ov);

  auto* af = add("ablate-finetune", "initialized-only versus trained");
  af->add_option("--split-dir", p.split_dir, "directory written by split")->required();
  af->add_option("--vocab", p.vocab, "vocabulary file")->required();
  af->add_option("--checkpoint", p.checkpoint, "trained checkpoint (trains when absent)");
  af->add_option("--out", p.out, "report file")->required();
  flag(af, "--percentile", ov.percentile, "quantile in (0, 100]");
  model_flags(af, ov);
  scoring_flags(af, ov);

  auto* hm = add("heatmap", "token-position probability matrix");
  hm->add_option("--in", p.in, "cleaned-log file")->required();
  hm->add_option("--vocab", p.vocab, "vocabulary file")->required();
  hm->add_option("--checkpoint", p.checkpoint, "checkpoint file")->required();
  hm->add_option("--out", p.out, "heatmap file")->required();

  auto* rerun = app.add_subcommand("rerun", "replay a command from its manifest");
  rerun->add_option("--manifest", p.manifest, "manifest file")->required();
  flag(rerun, "--threads", ov.threads, "override the recorded worker cap");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  auto* cmd = app.get_subcommands().front();
  if (cmd == rerun) {
    cmd_rerun(p, ov);
    return 0;
  }
  // Training settings apply to train and ablate-finetune only; scoring
  // strategies elsewhere.
  const bool training = cmd == train_cmd;
  Run run;
  run.command = cmd->get_name();
  run.args = args;
  run.ov = ov;
  run.cfg = effective_config(ov, training);
  run.manifest.command = run.command;
  run.manifest.args = args;
  run.manifest.config = config_to_json(run.cfg);
  run.manifest.tool_version = std::string(kToolVersion);
  run.manifest.started_at = utc_now();

  const std::string name = cmd->get_name();
  if (name == "synth") cmd_synth(run, p);
  else if (name == "clean") cmd_clean(run, p);
  else if (name == "split") cmd_split(run, p);
  else if (name == "build-vocab") cmd_build_vocab(run, p);
  else if (name == "train") cmd_train(run, p);
  else if (name == "score") cmd_score(run, p);
  else if (name == "calibrate") cmd_calibrate(run, p);
  else if (name == "detect") cmd_detect(run, p);
  else if (name == "eval") cmd_eval(run, p);
  else if (name == "ablate-masking") cmd_ablate_masking(run, p);
  else if (name == "ablate-finetune") cmd_ablate_finetune(run, p);
  else if (name == "heatmap") cmd_heatmap(run, p);

  run.manifest.finished_at = utc_now();
  write_file(run.manifest_path, run.manifest.to_json().dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return dispatch(args);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: FormatError: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 3;
  }
}
