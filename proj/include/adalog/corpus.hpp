#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adalog/metrics.hpp"
#include "adalog/normalize.hpp"

namespace adalog {

struct LabeledCorpus {
  std::vector<RawLog> logs;
  std::vector<Label> labels;  // parallel to logs
};

struct DedupeResult {
  std::vector<CleanLog> unique;            // first occurrence per cleaned text
  std::vector<std::size_t> multiplicity;   // parallel to unique
};

DedupeResult dedupe(std::span<const CleanLog> corpus);

struct Split {
  std::vector<CleanLog> train;
  std::vector<CleanLog> validation;
  std::vector<CleanLog> test;
  std::vector<Label> test_labels;  // parallel to test
  std::uint64_t seed = 0;
};

/// Seeded shuffle of the unique normals, then contiguous 70/15/15 cuts; every
/// anomaly is appended to the test partition. Throws TooFewLogs.
Split split(std::span<const CleanLog> unique_normals, std::span<const CleanLog> anomalies,
            std::uint64_t seed);

struct SynthConfig {
  std::size_t n_templates = 50;
  std::size_t n_normal = 5000;
  std::size_t n_anomalies = 200;
  std::uint64_t seed = 0;
};

/// Desk-scale log generator. Normal lines come from keyword templates with
/// categorical, numeric, path and address slots. Anomalies are a mix of
/// unseen templates over a separate vocabulary, shuffled normal templates and
/// normal lines with injected foreign tokens. Lines carry timestamps and
/// CamelCase compounds so they exercise the normalizer.
LabeledCorpus synthesize(const SynthConfig& cfg);

/// Template skeletons of the generator: component, then one entry per slot
/// ("{a|b|c}" for categorical slots, <number>, <path>, <address>).
struct SynthTemplates {
  std::vector<std::string> normal;
  std::vector<std::string> anomalous;
};

SynthTemplates synth_templates(const SynthConfig& cfg);

/// Only the normal-template part of the generator, under a separate stream:
/// a fresh sample from the same distribution as the normal logs of synthesize().
std::vector<RawLog> synthesize_normals(const SynthConfig& cfg, std::size_t n,
                                       std::uint64_t sample_seed);

/// One log per line; labels in a parallel file of 0/1 per line.
LabeledCorpus load_parallel(const std::filesystem::path& logs, const std::filesystem::path& labels);
/// One "label<TAB>text" record per line.
LabeledCorpus load_inline(const std::filesystem::path& path);
/// Unlabeled lines.
std::vector<RawLog> load_raw(const std::filesystem::path& path);

/// "label<TAB>text" lines.
std::string format_inline(const LabeledCorpus& corpus);

/// Cleaned-log file: source_id, line_no, label (0, 1 or "-"), text; tab-separated.
struct CleanCorpus {
  std::vector<CleanLog> logs;
  std::vector<std::optional<Label>> labels;

  /// Throws FormatError when any record is unlabeled.
  std::vector<Label> require_labels() const;
};

/// labels may be empty (all "-") or parallel to logs.
std::string format_clean(std::span<const CleanLog> logs, std::span<const Label> labels = {});
CleanCorpus parse_clean(std::string_view text);

/// train.tsv, validation.tsv and test.tsv in one directory.
void save_split(const Split& split, const std::filesystem::path& dir);
Split load_split(const std::filesystem::path& dir);

}  // namespace adalog
