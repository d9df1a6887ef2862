#include <cstring>
#include <map>

#include "adalog/error.hpp"
#include "adalog/io.hpp"
#include "adalog/train.hpp"

namespace adalog {
namespace {

constexpr std::string_view kMagic = "ADALOG-CHECKPOINT 1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t u(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorKind::FormatError, "truncated checkpoint");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string join_doubles(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += format_double(xs[i]);
  }
  return s;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& mc = ckpt.params.config;
  const auto& tc = ckpt.train_config;
  std::vector<std::pair<std::string, std::string>> header = {
      {"d_model", std::to_string(mc.d_model)},
      {"n_heads", std::to_string(mc.n_heads)},
      {"n_layers", std::to_string(mc.n_layers)},
      {"d_ff", std::to_string(mc.d_ff)},
      {"max_len", std::to_string(mc.max_len)},
      {"vocab_size", std::to_string(mc.vocab_size)},
      {"dropout_rate", format_double(mc.dropout_rate)},
      {"vocab_hash", ckpt.vocab_hash},
      {"epochs", std::to_string(tc.epochs)},
      {"batch_size", std::to_string(tc.batch_size)},
      {"mask_fraction", format_double(tc.mask_fraction)},
      {"learning_rate", format_double(tc.learning_rate)},
      {"weight_decay", format_double(tc.weight_decay)},
      {"beta1", format_double(tc.beta1)},
      {"beta2", format_double(tc.beta2)},
      {"epsilon", format_double(tc.epsilon)},
      {"grad_clip", tc.grad_clip ? format_double(*tc.grad_clip) : "none"},
      {"warmup_steps", std::to_string(tc.warmup_steps)},
      {"seed", std::to_string(tc.seed)},
      {"grad_shards", std::to_string(tc.grad_shards)},
      {"final_loss", format_double(ckpt.final_loss)},
      {"history", join_doubles(ckpt.history)},
  };
  std::string out(kMagic);
  out += '\n';
  for (const auto& [k, v] : header) out += k + "=" + v + "\n";
  out += '\n';

  std::uint32_t count = 0;
  ckpt.params.for_each([&](const std::string&, const Tensor&) { ++count; });
  put_u32(out, count);
  ckpt.params.for_each([&](const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto dim : t.shape()) put_u64(out, dim);
    for (double v : t.values()) {
      const float f = static_cast<float>(v);
      std::uint32_t bits = 0;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  });
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (!bytes.starts_with(kMagic) || bytes.size() <= kMagic.size() || bytes[kMagic.size()] != '\n') {
    throw Error(ErrorKind::FormatError, "not a checkpoint file");
  }
  const auto header_end = bytes.find("\n\n", kMagic.size());
  if (header_end == std::string_view::npos) {
    throw Error(ErrorKind::FormatError, "checkpoint header is not terminated");
  }
  std::map<std::string, std::string> kv;
  const auto header = bytes.substr(kMagic.size() + 1, header_end - kMagic.size() - 1);
  for (const auto& line : split(header, '\n')) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::FormatError, "bad header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorKind::FormatError, "checkpoint header lacks " + key);
    return it->second;
  };
  auto u = [&](const std::string& key) { return parse_u64(get(key), key); };
  auto d = [&](const std::string& key) { return parse_double(get(key), key); };

  ModelConfig mc;
  mc.d_model = u("d_model");
  mc.n_heads = u("n_heads");
  mc.n_layers = u("n_layers");
  mc.d_ff = u("d_ff");
  mc.max_len = u("max_len");
  mc.vocab_size = u("vocab_size");
  mc.dropout_rate = d("dropout_rate");
  mc.validate();

  Checkpoint ckpt;
  ckpt.vocab_hash = get("vocab_hash");
  auto& tc = ckpt.train_config;
  tc.epochs = u("epochs");
  tc.batch_size = u("batch_size");
  tc.mask_fraction = d("mask_fraction");
  tc.learning_rate = d("learning_rate");
  tc.weight_decay = d("weight_decay");
  tc.beta1 = d("beta1");
  tc.beta2 = d("beta2");
  tc.epsilon = d("epsilon");
  if (get("grad_clip") == "none") {
    tc.grad_clip.reset();
  } else {
    tc.grad_clip = d("grad_clip");
  }
  tc.warmup_steps = u("warmup_steps");
  tc.seed = u("seed");
  tc.grad_shards = u("grad_shards");
  ckpt.final_loss = d("final_loss");
  if (!get("history").empty()) {
    for (const auto& item : split(get("history"), ',')) {
      ckpt.history.push_back(parse_double(item, "history"));
    }
  }

  ckpt.params = Parameters::zeros(mc);
  Reader r(bytes.substr(header_end + 2));
  std::uint32_t expected = 0;
  ckpt.params.for_each([&](const std::string&, const Tensor&) { ++expected; });
  if (r.u(4) != expected) throw Error(ErrorKind::FormatError, "unexpected tensor count");
  ckpt.params.for_each([&](const std::string& name, Tensor& t) {
    const auto name_len = r.u(4);
    if (r.take(name_len) != name) {
      throw Error(ErrorKind::FormatError, "expected tensor record " + name);
    }
    const auto rank = r.u(4);
    if (rank != t.rank()) throw Error(ErrorKind::FormatError, name + ": rank mismatch");
    for (std::size_t i = 0; i < rank; ++i) {
      if (r.u(8) != t.shape()[i]) throw Error(ErrorKind::FormatError, name + ": shape mismatch");
    }
    for (double& v : t.values()) {
      const auto bits = static_cast<std::uint32_t>(r.u(4));
      float f = 0.0f;
      std::memcpy(&f, &bits, sizeof f);
      v = f;
    }
  });
  if (!r.done()) throw Error(ErrorKind::FormatError, "trailing bytes after tensor records");
  if (!ckpt.params.all_finite()) throw Error(ErrorKind::FormatError, "non-finite tensor values");
  return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace adalog
