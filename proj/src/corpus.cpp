#include "adalog/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>
#include <unordered_map>

#include "adalog/error.hpp"
#include "adalog/io.hpp"
#include "adalog/rng.hpp"

namespace adalog {

DedupeResult dedupe(std::span<const CleanLog> corpus) {
  DedupeResult out;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& log : corpus) {
    const auto [it, inserted] = seen.try_emplace(log.text, out.unique.size());
    if (inserted) {
      out.unique.push_back(log);
      out.multiplicity.push_back(1);
    } else {
      ++out.multiplicity[it->second];
    }
  }
  return out;
}

Split split(std::span<const CleanLog> unique_normals, std::span<const CleanLog> anomalies,
            std::uint64_t seed) {
  const std::size_t n = unique_normals.size();
  if (n < 10) {
    throw Error(ErrorKind::TooFewLogs,
                "need at least 10 unique normal logs, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {stream_tag("split")}));
  rng.shuffle(order.begin(), order.end());

  const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n)));
  Split s;
  s.seed = seed;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& log = unique_normals[order[k]];
    if (k < n_train) {
      s.train.push_back(log);
    } else if (k < n_train + n_val) {
      s.validation.push_back(log);
    } else {
      s.test.push_back(log);
      s.test_labels.push_back(Label::Normal);
    }
  }
  for (const auto& log : anomalies) {
    s.test.push_back(log);
    s.test_labels.push_back(Label::Anomalous);
  }
  return s;
}

namespace {

constexpr std::string_view kNormalWords[] = {
    "kernel", "node", "card", "link", "service", "daemon", "request", "response", "session",
    "user", "job", "task", "queue", "worker", "cache", "buffer", "memory", "disk", "block",
    "packet", "socket", "port", "channel", "stream", "thread", "process", "signal", "timer",
    "clock", "event", "handler", "module", "driver", "device", "controller", "interface",
    "network", "route", "table", "entry", "record", "file", "directory", "mount", "volume",
    "partition", "sector", "page", "frame", "segment", "region", "pool", "heap", "stack", "lock",
    "mutex", "barrier", "state", "status", "mode", "level", "value", "count", "size", "limit",
    "rate", "interval", "delay", "timeout", "retry", "attempt", "start", "stop", "open", "close",
    "read", "write", "send", "receive", "accept", "connect", "bind", "listen", "update", "check",
    "verify", "load", "save", "sync", "flush", "commit", "reset", "init", "ready", "idle", "busy",
    "active", "online", "complete", "done", "success", "ok", "valid", "enabled", "registered",
    "allocated", "released", "scheduled", "started", "finished", "received", "sent", "opened",
    "closed", "mounted", "loaded", "saved", "updated", "checked", "connected", "created",
    "removed", "assigned", "granted", "using", "from", "to", "for", "on", "at", "with", "by", "of",
    "in", "is", "was", "has", "new", "old", "next", "last", "current", "total", "free", "used",
    "available", "primary", "secondary", "local", "remote", "client", "server", "host", "agent",
    "manager", "monitor", "scanner", "parser", "router", "bridge", "gateway", "proxy", "backup",
    "replica", "shard", "index", "query", "transaction", "message", "notice", "info", "debug",
    "trace", "config", "setting", "policy", "rule", "profile", "account", "token", "key",
    "certificate", "health", "heartbeat", "ping", "poll"};

constexpr std::string_view kAnomalyWords[] = {
    "panic", "fatal", "corrupted", "segfault", "overflow", "underflow", "deadlock", "livelock",
    "thrashing", "crashed", "aborted", "halted", "unreachable", "diverged", "mismatch", "parity",
    "uncorrectable", "exception", "trap", "fault", "illegal", "instruction", "bogus", "poisoned",
    "stale", "orphaned", "zombie", "hung", "stalled", "starved", "leaked", "truncated", "garbled",
    "malformed", "rejected", "denied", "refused", "revoked", "expired", "invalid", "missing",
    "lost", "dropped", "failed", "failure", "broken", "dead", "killed", "terminated", "degraded",
    "unstable", "critical", "severe", "emergency", "alarm", "alert", "tripped", "burned", "melted",
    "shorted", "glitch", "spurious", "unexpected", "unknown", "forbidden", "violation", "breach",
    "intrusion", "rollback", "torn"};

constexpr std::string_view kComponents[] = {"RAS", "KERNEL", "APP", "MMCS", "DISCOVERY",
                                            "MONITOR", "LINKCARD", "HARDWARE"};

enum class SlotKind { Keyword, Compound, Choice, Number, Path, Address };

struct Slot {
  SlotKind kind = SlotKind::Keyword;
  std::vector<std::string> words;  // keyword: 1, compound: 2, choice: options
};

struct Template {
  std::string component;
  std::vector<Slot> slots;
};

template <std::size_t N>
std::string pick(Rng& rng, const std::string_view (&words)[N]) {
  return std::string(words[rng.below(N)]);
}

std::string capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

template <std::size_t N>
Template make_template(Rng& rng, const std::string_view (&words)[N]) {
  Template t;
  t.component = std::string(kComponents[rng.below(std::size(kComponents))]);
  const std::size_t length = 10 + rng.below(7);
  const std::size_t choice_slots = 1 + rng.below(3);
  std::vector<std::size_t> choice_at;
  while (choice_at.size() < choice_slots) {
    const std::size_t pos = 1 + rng.below(length - 1);
    if (std::find(choice_at.begin(), choice_at.end(), pos) == choice_at.end()) {
      choice_at.push_back(pos);
    }
  }
  for (std::size_t i = 0; i < length; ++i) {
    Slot slot;
    const double u = rng.uniform();
    if (std::find(choice_at.begin(), choice_at.end(), i) != choice_at.end()) {
      slot.kind = SlotKind::Choice;
      const std::size_t options = 3 + rng.below(4);
      while (slot.words.size() < options) {
        auto w = pick(rng, words);
        if (std::find(slot.words.begin(), slot.words.end(), w) == slot.words.end()) {
          slot.words.push_back(std::move(w));
        }
      }
    } else if (i > 0 && u < 0.25) {
      const double v = rng.uniform();
      slot.kind = v < 0.5 ? SlotKind::Number : v < 0.75 ? SlotKind::Path : SlotKind::Address;
    } else if (u < 0.4) {
      slot.kind = SlotKind::Compound;
      slot.words = {pick(rng, words), pick(rng, words)};
    } else {
      slot.kind = SlotKind::Keyword;
      slot.words = {pick(rng, words)};
    }
    t.slots.push_back(std::move(slot));
  }
  return t;
}

std::string render_slot(Rng& rng, const Slot& slot) {
  switch (slot.kind) {
    case SlotKind::Keyword:
      return slot.words[0];
    case SlotKind::Compound:
      return capitalize(slot.words[0]) + capitalize(slot.words[1]);
    case SlotKind::Choice:
      return slot.words[rng.below(slot.words.size())];
    case SlotKind::Number:
      if (rng.bernoulli(0.5)) return std::to_string(rng.below(65536));
      return std::to_string(rng.below(100)) + "." + std::to_string(1000 + rng.below(9000));
    case SlotKind::Path:
      return "/" + pick(rng, kNormalWords) + "/" + pick(rng, kNormalWords) + "/" +
             pick(rng, kNormalWords) + ".log";
    case SlotKind::Address:
      if (rng.bernoulli(0.5)) {
        return "10." + std::to_string(rng.below(256)) + "." + std::to_string(rng.below(256)) +
               "." + std::to_string(rng.below(256));
      } else {
        static constexpr char kHex[] = "0123456789abcdef";
        std::string s = "0x";
        for (int i = 0; i < 8; ++i) s += kHex[rng.below(16)];
        return s;
      }
  }
  return {};
}

std::string timestamp_prefix(Rng& rng) {
  auto two = [&](std::uint64_t bound) {
    const auto v = rng.below(bound);
    return (v < 10 ? "0" : "") + std::to_string(v);
  };
  const auto day_no = 1 + rng.below(28);
  const std::string day = std::string("2005-06-") + (day_no < 10 ? "0" : "") + std::to_string(day_no);
  const std::string clock = two(24) + "." + two(60) + "." + two(60);
  const std::string micros = std::to_string(100000 + rng.below(900000));
  const std::string bgl = day + "-" + clock + "." + micros;
  if (rng.bernoulli(0.5)) return bgl;
  const std::string epoch = std::to_string(1117838570 + rng.below(10000000));
  std::string dotted = day;
  std::replace(dotted.begin(), dotted.end(), '-', '.');
  return "- " + epoch + " " + dotted + " " + bgl;
}

std::string join_line(Rng& rng, const std::string& component, const std::vector<std::string>& parts) {
  std::string line = timestamp_prefix(rng) + " " + component + " ";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) line += i == 1 && rng.bernoulli(0.3) ? ": " : " ";
    line += parts[i];
  }
  return line;
}

std::vector<std::string> render_parts(Rng& rng, const Template& t) {
  std::vector<std::string> parts;
  parts.reserve(t.slots.size());
  for (const auto& slot : t.slots) parts.push_back(render_slot(rng, slot));
  return parts;
}

struct Generator {
  std::vector<Template> normal;
  std::vector<Template> anomalous;

  explicit Generator(const SynthConfig& cfg) {
    if (cfg.n_templates < 2) {
      throw Error(ErrorKind::InvalidArgument, "synthesize needs at least 2 templates");
    }
    Rng rng(derive_seed(cfg.seed, {stream_tag("templates")}));
    for (std::size_t i = 0; i < cfg.n_templates; ++i) normal.push_back(make_template(rng, kNormalWords));
    const std::size_t n_anomalous = std::max<std::size_t>(2, cfg.n_templates / 5);
    for (std::size_t i = 0; i < n_anomalous; ++i) {
      anomalous.push_back(make_template(rng, kAnomalyWords));
    }
  }

  std::string normal_line(Rng& rng) const {
    const auto& t = normal[rng.below(normal.size())];
    return join_line(rng, t.component, render_parts(rng, t));
  }

  std::string anomalous_line(Rng& rng) const {
    const double kind = rng.uniform();
    if (kind < 0.4) {
      const auto& t = anomalous[rng.below(anomalous.size())];
      return join_line(rng, t.component, render_parts(rng, t));
    }
    const auto& t = normal[rng.below(normal.size())];
    auto parts = render_parts(rng, t);
    if (kind < 0.9) {
      // Out-of-order keywords over seen vocabulary: at most a quarter stay put.
      const auto original = parts;
      for (int attempt = 0; attempt < 64; ++attempt) {
        rng.shuffle(parts.begin(), parts.end());
        std::size_t fixed = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) fixed += parts[i] == original[i];
        if (fixed * 4 <= parts.size()) break;
      }
    } else {
      for (int k = 0; k < 4; ++k) {
        const auto at = rng.below(parts.size() + 1);
        parts.insert(parts.begin() + static_cast<std::ptrdiff_t>(at), pick(rng, kAnomalyWords));
      }
    }
    return join_line(rng, t.component, parts);
  }
};

std::string skeleton(const Template& t) {
  std::string out = t.component;
  for (const auto& slot : t.slots) {
    out += ' ';
    switch (slot.kind) {
      case SlotKind::Keyword: out += slot.words[0]; break;
      case SlotKind::Compound: out += capitalize(slot.words[0]) + capitalize(slot.words[1]); break;
      case SlotKind::Choice: {
        out += '{';
        for (std::size_t i = 0; i < slot.words.size(); ++i) out += (i ? "|" : "") + slot.words[i];
        out += '}';
        break;
      }
      case SlotKind::Number: out += "<number>"; break;
      case SlotKind::Path: out += "<path>"; break;
      case SlotKind::Address: out += "<address>"; break;
    }
  }
  return out;
}

}  // namespace

SynthTemplates synth_templates(const SynthConfig& cfg) {
  const Generator gen(cfg);
  SynthTemplates out;
  for (const auto& t : gen.normal) out.normal.push_back(skeleton(t));
  for (const auto& t : gen.anomalous) out.anomalous.push_back(skeleton(t));
  return out;
}

LabeledCorpus synthesize(const SynthConfig& cfg) {
  const Generator gen(cfg);
  Rng rng(derive_seed(cfg.seed, {stream_tag("logs")}));
  std::vector<Label> labels(cfg.n_normal, Label::Normal);
  labels.resize(cfg.n_normal + cfg.n_anomalies, Label::Anomalous);
  rng.shuffle(labels.begin(), labels.end());

  LabeledCorpus out;
  out.labels = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    RawLog log;
    log.text = labels[i] == Label::Normal ? gen.normal_line(rng) : gen.anomalous_line(rng);
    log.source_id = "synth";
    log.line_no = i + 1;
    out.logs.push_back(std::move(log));
  }
  return out;
}

std::vector<RawLog> synthesize_normals(const SynthConfig& cfg, std::size_t n,
                                       std::uint64_t sample_seed) {
  const Generator gen(cfg);
  Rng rng(derive_seed(cfg.seed, {stream_tag("fresh-normals"), sample_seed}));
  std::vector<RawLog> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({gen.normal_line(rng), "synth-fresh-" + std::to_string(sample_seed), i + 1});
  }
  return out;
}

namespace {

std::string source_name(const std::filesystem::path& path) { return path.filename().string(); }

}  // namespace

std::vector<RawLog> load_raw(const std::filesystem::path& path) {
  std::vector<RawLog> out;
  const auto lines = read_lines(path);
  const auto source = source_name(path);
  for (std::size_t i = 0; i < lines.size(); ++i) out.push_back({lines[i], source, i + 1});
  return out;
}

LabeledCorpus load_parallel(const std::filesystem::path& logs, const std::filesystem::path& labels) {
  LabeledCorpus out;
  out.logs = load_raw(logs);
  const auto label_lines = read_lines(labels);
  if (label_lines.size() != out.logs.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(out.logs.size()) + " logs but " +
                                               std::to_string(label_lines.size()) + " labels");
  }
  for (const auto& l : label_lines) out.labels.push_back(parse_label(l));
  return out;
}

LabeledCorpus load_inline(const std::filesystem::path& path) {
  LabeledCorpus out;
  const auto lines = read_lines(path);
  const auto source = source_name(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorKind::FormatError,
                  path.string() + ":" + std::to_string(i + 1) + ": expected label<TAB>text");
    }
    out.labels.push_back(parse_label(lines[i].substr(0, tab)));
    out.logs.push_back({lines[i].substr(tab + 1), source, i + 1});
  }
  return out;
}

std::string format_inline(const LabeledCorpus& corpus) {
  std::string out;
  for (std::size_t i = 0; i < corpus.logs.size(); ++i) {
    out += corpus.labels[i] == Label::Anomalous ? "1\t" : "0\t";
    out += corpus.logs[i].text + "\n";
  }
  return out;
}

std::vector<Label> CleanCorpus::require_labels() const {
  std::vector<Label> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) {
      throw Error(ErrorKind::FormatError, "record " + std::to_string(i + 1) + " has no label");
    }
    out.push_back(*labels[i]);
  }
  return out;
}

std::string format_clean(std::span<const CleanLog> logs, std::span<const Label> labels) {
  if (!labels.empty() && labels.size() != logs.size()) {
    throw Error(ErrorKind::LengthMismatch, "labels must be parallel to logs");
  }
  std::string out;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    out += logs[i].raw_ref.source_id + "\t" + std::to_string(logs[i].raw_ref.line_no) + "\t";
    out += labels.empty() ? "-" : labels[i] == Label::Anomalous ? "1" : "0";
    out += "\t" + logs[i].text + "\n";
  }
  return out;
}

CleanCorpus parse_clean(std::string_view text) {
  CleanCorpus out;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 4) {
      throw Error(ErrorKind::FormatError,
                  "cleaned-log line " + std::to_string(line_no) + ": expected 4 tab-separated columns");
    }
    CleanLog log;
    log.raw_ref = {cols[0], parse_u64(cols[1], "line_no")};
    log.text = cols[3];
    out.logs.push_back(std::move(log));
    if (cols[2] == "-") {
      out.labels.emplace_back();
    } else {
      out.labels.emplace_back(parse_label(cols[2]));
    }
  }
  return out;
}

void save_split(const Split& s, const std::filesystem::path& dir) {
  write_file(dir / "train.tsv", format_clean(s.train));
  write_file(dir / "validation.tsv", format_clean(s.validation));
  write_file(dir / "test.tsv", format_clean(s.test, s.test_labels));
}

Split load_split(const std::filesystem::path& dir) {
  Split s;
  s.train = parse_clean(read_file(dir / "train.tsv")).logs;
  s.validation = parse_clean(read_file(dir / "validation.tsv")).logs;
  auto test = parse_clean(read_file(dir / "test.tsv"));
  s.test_labels = test.require_labels();
  s.test = std::move(test.logs);
  return s;
}

}  // namespace adalog
