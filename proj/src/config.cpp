#include "adalog/config.hpp"

#include <chrono>
#include <ctime>
#include <functional>

#include "adalog/error.hpp"
#include "adalog/io.hpp"

namespace adalog {

void RunConfig::validate() const {
  try {
    if (min_freq < 1) throw Error(ErrorKind::ConfigInvalid, "vocab.min_freq must be >= 1");
    if (max_vocab <= special::kCount) {
      throw Error(ErrorKind::ConfigInvalid, "vocab.max_size must exceed the special tokens");
    }
    if (!(percentile > 0.0 && percentile <= 100.0)) {
      throw Error(ErrorKind::ConfigInvalid, "calibrate.percentile must lie in (0, 100]");
    }
    if (repeats < 1) throw Error(ErrorKind::ConfigInvalid, "score.repeats must be >= 1");
    if (score_batch_size < 1) throw Error(ErrorKind::ConfigInvalid, "score.batch_size must be >= 1");
    if (synth.n_templates < 2) throw Error(ErrorKind::ConfigInvalid, "synth.templates must be >= 2");
    strategy.validate();
    train.validate();
    auto m = model;
    if (m.vocab_size == 0) m.vocab_size = special::kCount + 1;
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigInvalid, e.what());
  }
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["vocab"] = {{"min_freq", cfg.min_freq}, {"max_size", cfg.max_vocab}};
  j["model"] = {{"d_model", cfg.model.d_model},   {"n_heads", cfg.model.n_heads},
                {"n_layers", cfg.model.n_layers}, {"d_ff", cfg.model.d_ff},
                {"max_len", cfg.model.max_len},   {"dropout_rate", cfg.model.dropout_rate}};
  nlohmann::ordered_json t;
  t["epochs"] = cfg.train.epochs;
  t["batch_size"] = cfg.train.batch_size;
  t["mask_fraction"] = cfg.train.mask_fraction;
  t["learning_rate"] = cfg.train.learning_rate;
  t["weight_decay"] = cfg.train.weight_decay;
  t["beta1"] = cfg.train.beta1;
  t["beta2"] = cfg.train.beta2;
  t["epsilon"] = cfg.train.epsilon;
  t["grad_clip"] = cfg.train.grad_clip ? nlohmann::ordered_json(*cfg.train.grad_clip) : nullptr;
  t["warmup_steps"] = cfg.train.warmup_steps;
  t["grad_shards"] = cfg.train.grad_shards;
  j["train"] = t;
  j["score"] = {{"strategy", cfg.strategy.descriptor()},
                {"repeats", cfg.repeats},
                {"batch_size", cfg.score_batch_size}};
  j["calibrate"] = {{"percentile", cfg.percentile}};
  j["synth"] = {{"templates", cfg.synth.n_templates},
                {"normal", cfg.synth.n_normal},
                {"anomalies", cfg.synth.n_anomalies}};
  return j;
}

namespace {

using Setter = std::function<void(const nlohmann::json&, const std::string&)>;

template <typename T>
Setter set(T& field) {
  return [&field](const nlohmann::json& v, const std::string& key) {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw Error(ErrorKind::ConfigInvalid, key + ": expected a number");
      field = v.get<double>();
    } else {
      if (!v.is_number_unsigned()) {
        throw Error(ErrorKind::ConfigInvalid, key + ": expected a non-negative integer");
      }
      field = v.get<T>();
    }
  };
}

void apply_section(const nlohmann::json& doc, const std::string& prefix,
                   const std::map<std::string, Setter>& setters) {
  if (!doc.is_object()) {
    throw Error(ErrorKind::ConfigInvalid, (prefix.empty() ? "config" : prefix) + ": expected an object");
  }
  for (const auto& [key, value] : doc.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    const auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorKind::ConfigInvalid, "unknown config key: " + path);
    it->second(value, path);
  }
}

}  // namespace

RunConfig apply_config_json(RunConfig cfg, const nlohmann::json& doc) {
  auto section = [](std::map<std::string, Setter> setters, std::string name) -> Setter {
    return [setters = std::move(setters), name](const nlohmann::json& v, const std::string&) {
      apply_section(v, name, setters);
    };
  };
  std::map<std::string, Setter> top = {
      {"seed", set(cfg.seed)},
      {"threads", set(cfg.threads)},
      {"vocab", section({{"min_freq", set(cfg.min_freq)}, {"max_size", set(cfg.max_vocab)}}, "vocab")},
      {"model", section({{"d_model", set(cfg.model.d_model)},
                         {"n_heads", set(cfg.model.n_heads)},
                         {"n_layers", set(cfg.model.n_layers)},
                         {"d_ff", set(cfg.model.d_ff)},
                         {"max_len", set(cfg.model.max_len)},
                         {"dropout_rate", set(cfg.model.dropout_rate)}},
                        "model")},
      {"train", section({{"epochs", set(cfg.train.epochs)},
                         {"batch_size", set(cfg.train.batch_size)},
                         {"mask_fraction", set(cfg.train.mask_fraction)},
                         {"learning_rate", set(cfg.train.learning_rate)},
                         {"weight_decay", set(cfg.train.weight_decay)},
                         {"beta1", set(cfg.train.beta1)},
                         {"beta2", set(cfg.train.beta2)},
                         {"epsilon", set(cfg.train.epsilon)},
                         {"grad_clip",
                          [&cfg](const nlohmann::json& v, const std::string& key) {
                            if (v.is_null()) {
                              cfg.train.grad_clip.reset();
                            } else if (v.is_number()) {
                              cfg.train.grad_clip = v.get<double>();
                            } else {
                              throw Error(ErrorKind::ConfigInvalid, key + ": expected a number or null");
                            }
                          }},
                         {"warmup_steps", set(cfg.train.warmup_steps)},
                         {"grad_shards", set(cfg.train.grad_shards)}},
                        "train")},
      {"score", section({{"strategy",
                          [&cfg](const nlohmann::json& v, const std::string& key) {
                            if (!v.is_string()) throw Error(ErrorKind::ConfigInvalid, key + ": expected a string");
                            try {
                              cfg.strategy = MaskingStrategy::parse(v.get<std::string>());
                            } catch (const Error& e) {
                              throw Error(ErrorKind::ConfigInvalid, key + ": " + e.what());
                            }
                          }},
                         {"repeats", set(cfg.repeats)},
                         {"batch_size", set(cfg.score_batch_size)}},
                        "score")},
      {"calibrate", section({{"percentile", set(cfg.percentile)}}, "calibrate")},
      {"synth", section({{"templates", set(cfg.synth.n_templates)},
                         {"normal", set(cfg.synth.n_normal)},
                         {"anomalies", set(cfg.synth.n_anomalies)}},
                        "synth")},
  };
  apply_section(doc, "", top);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
  }
  return apply_config_json(std::move(base), doc);
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["args"] = args;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["digests"] = digests;
  j["tool_version"] = tool_version;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.config = j.at("config");
    m.inputs = j.value("inputs", std::map<std::string, std::string>{});
    m.outputs = j.value("outputs", std::map<std::string, std::string>{});
    m.digests = j.value("digests", std::map<std::string, std::string>{});
    m.tool_version = j.value("tool_version", std::string{});
    m.started_at = j.value("started_at", std::string{});
    m.finished_at = j.value("finished_at", std::string{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("manifest: ") + e.what());
  }
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace adalog
