#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "adalog/corpus.hpp"
#include "adalog/masking.hpp"
#include "adalog/model.hpp"
#include "adalog/train.hpp"

namespace adalog {

/// Effective configuration of a command. Every field has a documented default
/// (see README); a JSON file and then command-line flags override it.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: one worker per hardware thread

  std::size_t min_freq = 1;
  std::size_t max_vocab = 4096;

  ModelConfig model;  // vocab_size comes from the vocabulary file
  TrainConfig train;  // train.seed and train.threads mirror the top level

  MaskingStrategy strategy;
  std::size_t repeats = 1;
  std::size_t score_batch_size = 16;
  double percentile = 90.0;

  SynthConfig synth;

  /// Throws ConfigInvalid naming the offending field.
  void validate() const;
};

nlohmann::ordered_json config_to_json(const RunConfig& cfg);

/// Overlays a JSON document onto base. Unknown keys and ill-typed values are
/// rejected with ConfigInvalid naming the key.
RunConfig apply_config_json(RunConfig base, const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Record sufficient to re-run a command: its argument vector, the effective
/// configuration and digests of every input and output.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;  // without the program name
  nlohmann::ordered_json config;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::map<std::string, std::string> digests;  // checkpoint, vocab, threshold
  std::string tool_version;
  std::string started_at;
  std::string finished_at;

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

inline constexpr std::string_view kToolVersion = "0.1.0";

/// UTC, ISO 8601.
std::string utc_now();

}  // namespace adalog
