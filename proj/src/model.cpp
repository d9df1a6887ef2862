#include "adalog/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "adalog/digest.hpp"
#include "adalog/error.hpp"
#include "adalog/parallel.hpp"
#include "adalog/rng.hpp"

namespace adalog {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::ConfigInvalid, what); };
  if (d_model < 1) fail("d_model must be >= 1");
  if (n_heads < 1) fail("n_heads must be >= 1");
  if (n_layers < 1) fail("n_layers must be >= 1");
  if (d_ff < 1) fail("d_ff must be >= 1");
  if (max_len < 2) fail("max_len must be >= 2");
  if (vocab_size < special::kCount + 1) fail("vocab_size must be >= 5");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
}

Parameters Parameters::zeros(const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  Parameters p;
  p.config = cfg;
  p.token_embedding = Tensor::matrix(cfg.vocab_size, d);
  p.position_embedding = Tensor::matrix(cfg.max_len, d);
  auto linear = [](std::size_t in, std::size_t out) {
    return Linear{Tensor::matrix(in, out), Tensor::vector(out)};
  };
  auto norm = [d] { return Norm{Tensor::vector(d), Tensor::vector(d)}; };
  p.layers.resize(cfg.n_layers);
  for (auto& layer : p.layers) {
    layer.attention_norm = norm();
    layer.query = linear(d, d);
    layer.key = linear(d, d);
    layer.value = linear(d, d);
    layer.output = linear(d, d);
    layer.ffn_norm = norm();
    layer.ffn_input = linear(d, cfg.d_ff);
    layer.ffn_output = linear(cfg.d_ff, d);
  }
  p.final_norm = norm();
  p.head = linear(d, cfg.vocab_size);
  return p;
}

namespace {

template <typename P, typename F>
void visit_tensors(P& p, F&& fn) {
  fn("embeddings.token", p.token_embedding);
  fn("embeddings.position", p.position_embedding);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const std::string pre = "layers." + std::to_string(l) + ".";
    fn(pre + "attention_norm.gain", layer.attention_norm.gain);
    fn(pre + "attention_norm.offset", layer.attention_norm.offset);
    fn(pre + "attention.query.weight", layer.query.weight);
    fn(pre + "attention.query.bias", layer.query.bias);
    fn(pre + "attention.key.weight", layer.key.weight);
    fn(pre + "attention.key.bias", layer.key.bias);
    fn(pre + "attention.value.weight", layer.value.weight);
    fn(pre + "attention.value.bias", layer.value.bias);
    fn(pre + "attention.output.weight", layer.output.weight);
    fn(pre + "attention.output.bias", layer.output.bias);
    fn(pre + "ffn_norm.gain", layer.ffn_norm.gain);
    fn(pre + "ffn_norm.offset", layer.ffn_norm.offset);
    fn(pre + "ffn.input.weight", layer.ffn_input.weight);
    fn(pre + "ffn.input.bias", layer.ffn_input.bias);
    fn(pre + "ffn.output.weight", layer.ffn_output.weight);
    fn(pre + "ffn.output.bias", layer.ffn_output.bias);
  }
  fn("final_norm.gain", p.final_norm.gain);
  fn("final_norm.offset", p.final_norm.offset);
  fn("head.weight", p.head.weight);
  fn("head.bias", p.head.bias);
}

}  // namespace

void Parameters::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
  visit_tensors(*this, fn);
}

void Parameters::for_each(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  visit_tensors(*this, fn);
}

std::size_t Parameters::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

bool Parameters::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Tensor& t) {
    for (double v : t.values()) ok = ok && std::isfinite(v);
  });
  return ok;
}

Parameters init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Parameters p = Parameters::zeros(cfg);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  std::uint64_t index = 0;
  p.for_each([&](const std::string& name, Tensor& t) {
    Rng rng(derive_seed(seed, {stream_tag("init"), index++}));
    const bool is_gain = name.ends_with(".gain");
    const bool is_zero = name.ends_with(".bias") || name.ends_with(".offset");
    for (double& v : t.values()) {
      if (is_gain) {
        v = 1.0;
      } else if (is_zero) {
        v = 0.0;
      } else {
        v = static_cast<float>(rng.uniform(-scale, scale));
      }
    }
  });
  return p;
}

void round_to_float32(Parameters& params) {
  params.for_each([](const std::string&, Tensor& t) {
    for (double& v : t.values()) v = static_cast<float>(v);
  });
}

std::string parameters_digest(const Parameters& params) {
  std::string bytes;
  params.for_each([&](const std::string& name, const Tensor& t) {
    bytes += name;
    bytes += '\0';
    for (auto dim : t.shape()) bytes += std::to_string(dim) + ",";
    bytes += '\0';
    for (double v : t.values()) {
      const float f = static_cast<float>(v);
      char raw[sizeof(float)];
      std::memcpy(raw, &f, sizeof f);
      bytes.append(raw, sizeof raw);
    }
  });
  return sha256_hex(bytes);
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

namespace {

constexpr double kNormEps = 1e-5;

struct LayerCache {
  Tensor xhat1, h1;
  std::vector<double> rstd1;
  Tensor q, k, v;
  std::vector<Tensor> attn;  // per head [rows x content]
  Tensor ctx;
  std::vector<double> drop_attn;
  Tensor xhat2, h2;
  std::vector<double> rstd2;
  Tensor u, g;
  std::vector<double> drop_ffn;
};

struct SequenceCache {
  std::size_t rows = 0;
  std::size_t content = 0;
  std::vector<LayerCache> layers;
  Tensor xhatf, hf;
  std::vector<double> rstdf;
};

struct LayerTransposed {
  Tensor query, key, value, output, ffn_input, ffn_output;
};

struct TransposedWeights {
  std::vector<LayerTransposed> layers;
  Tensor head;

  explicit TransposedWeights(const Parameters& p) : layers(p.layers.size()) {
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      const auto& src = p.layers[l];
      auto& dst = layers[l];
      linalg::transpose(src.query.weight, dst.query);
      linalg::transpose(src.key.weight, dst.key);
      linalg::transpose(src.value.weight, dst.value);
      linalg::transpose(src.output.weight, dst.output);
      linalg::transpose(src.ffn_input.weight, dst.ffn_input);
      linalg::transpose(src.ffn_output.weight, dst.ffn_output);
    }
    linalg::transpose(p.head.weight, head);
  }
};

void layer_norm(const Tensor& x, const Norm& norm, Tensor& xhat, std::vector<double>& rstd,
                Tensor& y) {
  const std::size_t rows = x.rows(), d = x.cols();
  xhat.resize(rows, d);
  y.resize(rows, d);
  rstd.assign(rows, 0.0);
  const double* gain = norm.gain.data();
  const double* offset = norm.offset.data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xr = x.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double r = 1.0 / std::sqrt(var + kNormEps);
    rstd[i] = r;
    double* xh = xhat.row(i);
    double* yr = y.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (xr[j] - mean) * r;
      yr[j] = gain[j] * xh[j] + offset[j];
    }
  }
}

// dx += d(layer_norm)/dx applied to dy; accumulates gain/offset gradients.
void layer_norm_backward(const Tensor& dy, const Norm& norm, const Tensor& xhat,
                         const std::vector<double>& rstd, Norm& grad, Tensor& dx) {
  const std::size_t rows = dy.rows(), d = dy.cols();
  const double* gain = norm.gain.data();
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* dyr = dy.row(i);
    const double* xh = xhat.row(i);
    double* gg = grad.gain.data();
    double* go = grad.offset.data();
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      gg[j] += dyr[j] * xh[j];
      go[j] += dyr[j];
      dxhat[j] = dyr[j] * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xh[j];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    double* dxr = dx.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      dxr[j] += rstd[i] * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
    }
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

inline double gelu(double u) {
  return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u)));
}

inline double gelu_grad(double u) {
  const double t = std::tanh(kGeluC * (u + kGeluA * u * u * u));
  return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

void make_dropout(Rng& rng, double rate, std::size_t n, std::vector<double>& mask) {
  mask.resize(n);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
}

void attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t content,
               std::size_t heads, std::vector<Tensor>& attn, Tensor& ctx) {
  const std::size_t rows = q.rows(), d = q.cols(), dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  attn.resize(heads);
  ctx.resize(rows, d);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    Tensor& a = attn[h];
    a.resize(rows, content);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* qi = q.row(i) + off;
      double* ar = a.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < content; ++j) {
        const double* kj = k.row(j) + off;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        ar[j] = s * scale;
        mx = std::max(mx, ar[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < content; ++j) {
        ar[j] = std::exp(ar[j] - mx);
        sum += ar[j];
      }
      const double inv = 1.0 / sum;
      double* ci = ctx.row(i) + off;
      for (std::size_t j = 0; j < content; ++j) {
        ar[j] *= inv;
        const double* vj = v.row(j) + off;
        for (std::size_t c = 0; c < dh; ++c) ci[c] += ar[j] * vj[c];
      }
    }
  }
}

void attention_backward(const Tensor& dctx, const Tensor& q, const Tensor& k, const Tensor& v,
                        const std::vector<Tensor>& attn, std::size_t content, Tensor& dq,
                        Tensor& dk, Tensor& dv) {
  const std::size_t rows = q.rows(), d = q.cols(), heads = attn.size(), dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq.resize(rows, d);
  dk.resize(rows, d);
  dv.resize(rows, d);
  std::vector<double> da(content);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const Tensor& a = attn[h];
    for (std::size_t i = 0; i < rows; ++i) {
      const double* dci = dctx.row(i) + off;
      const double* ar = a.row(i);
      double weighted = 0.0;
      for (std::size_t j = 0; j < content; ++j) {
        const double* vj = v.row(j) + off;
        double* dvj = dv.row(j) + off;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += dci[c] * vj[c];
          dvj[c] += ar[j] * dci[c];
        }
        da[j] = s;
        weighted += ar[j] * s;
      }
      const double* qi = q.row(i) + off;
      double* dqi = dq.row(i) + off;
      for (std::size_t j = 0; j < content; ++j) {
        const double ds = ar[j] * (da[j] - weighted) * scale;
        if (ds == 0.0) continue;
        const double* kj = k.row(j) + off;
        double* dkj = dk.row(j) + off;
        for (std::size_t c = 0; c < dh; ++c) {
          dqi[c] += ds * kj[c];
          dkj[c] += ds * qi[c];
        }
      }
    }
  }
}

// Runs the encoder stack over `rows` positions of ids, of which the first
// `content` are attendable keys. Fills cache.hf with the final hidden states.
void encode(const Parameters& p, std::span<const TokenId> ids, std::size_t content,
            std::optional<std::uint64_t> dropout_seed, SequenceCache& cache) {
  const auto& cfg = p.config;
  const std::size_t rows = ids.size(), d = cfg.d_model;
  cache.rows = rows;
  cache.content = content;
  cache.layers.resize(cfg.n_layers);
  const bool dropout = dropout_seed.has_value() && cfg.dropout_rate > 0.0;

  Tensor x = Tensor::matrix(rows, d);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* te = p.token_embedding.row(static_cast<std::size_t>(ids[i]));
    const double* pe = p.position_embedding.row(i);
    double* xr = x.row(i);
    for (std::size_t j = 0; j < d; ++j) xr[j] = te[j] + pe[j];
  }

  Tensor a, f;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto& w = p.layers[l];
    auto& c = cache.layers[l];
    layer_norm(x, w.attention_norm, c.xhat1, c.rstd1, c.h1);
    linalg::matmul(c.h1, w.query.weight, &w.query.bias, c.q);
    linalg::matmul(c.h1, w.key.weight, &w.key.bias, c.k);
    linalg::matmul(c.h1, w.value.weight, &w.value.bias, c.v);
    attention(c.q, c.k, c.v, content, cfg.n_heads, c.attn, c.ctx);
    linalg::matmul(c.ctx, w.output.weight, &w.output.bias, a);
    if (dropout) {
      Rng rng(derive_seed(*dropout_seed, {stream_tag("dropout.attention"), l}));
      make_dropout(rng, cfg.dropout_rate, a.size(), c.drop_attn);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] *= c.drop_attn[i];
    } else {
      c.drop_attn.clear();
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += a[i];

    layer_norm(x, w.ffn_norm, c.xhat2, c.rstd2, c.h2);
    linalg::matmul(c.h2, w.ffn_input.weight, &w.ffn_input.bias, c.u);
    c.g.resize(c.u.rows(), c.u.cols());
    for (std::size_t i = 0; i < c.u.size(); ++i) c.g[i] = gelu(c.u[i]);
    linalg::matmul(c.g, w.ffn_output.weight, &w.ffn_output.bias, f);
    if (dropout) {
      Rng rng(derive_seed(*dropout_seed, {stream_tag("dropout.ffn"), l}));
      make_dropout(rng, cfg.dropout_rate, f.size(), c.drop_ffn);
      for (std::size_t i = 0; i < f.size(); ++i) f[i] *= c.drop_ffn[i];
    } else {
      c.drop_ffn.clear();
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += f[i];
  }
  layer_norm(x, p.final_norm, cache.xhatf, cache.rstdf, cache.hf);
}

// Backpropagates dhf (gradient at the final hidden states) through the stack.
void encode_backward(const Parameters& p, const TransposedWeights& wt,
                     std::span<const TokenId> ids, const SequenceCache& cache, const Tensor& dhf,
                     Parameters& grad) {
  const auto& cfg = p.config;
  const std::size_t rows = cache.rows, d = cfg.d_model;
  Tensor dx = Tensor::matrix(rows, d);
  layer_norm_backward(dhf, p.final_norm, cache.xhatf, cache.rstdf, grad.final_norm, dx);

  Tensor df, dg, du, dh, da, dctx, dq, dk, dv, tmp;
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const auto& w = p.layers[l];
    const auto& t = wt.layers[l];
    const auto& c = cache.layers[l];
    auto& gl = grad.layers[l];

    // feed-forward block: x_out = x_mid + dropout(gelu(h2 W1 + b1) W2 + b2)
    df = dx;
    if (!c.drop_ffn.empty()) {
      for (std::size_t i = 0; i < df.size(); ++i) df[i] *= c.drop_ffn[i];
    }
    linalg::matmul_tn_acc(c.g, df, gl.ffn_output.weight);
    linalg::add_column_sums(df, gl.ffn_output.bias);
    linalg::matmul(df, t.ffn_output, nullptr, dg);
    du.resize(dg.rows(), dg.cols());
    for (std::size_t i = 0; i < dg.size(); ++i) du[i] = dg[i] * gelu_grad(c.u[i]);
    linalg::matmul_tn_acc(c.h2, du, gl.ffn_input.weight);
    linalg::add_column_sums(du, gl.ffn_input.bias);
    linalg::matmul(du, t.ffn_input, nullptr, dh);
    layer_norm_backward(dh, w.ffn_norm, c.xhat2, c.rstd2, gl.ffn_norm, dx);

    // attention block: x_mid = x_in + dropout(attn(h1) Wo + bo)
    da = dx;
    if (!c.drop_attn.empty()) {
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= c.drop_attn[i];
    }
    linalg::matmul_tn_acc(c.ctx, da, gl.output.weight);
    linalg::add_column_sums(da, gl.output.bias);
    linalg::matmul(da, t.output, nullptr, dctx);
    attention_backward(dctx, c.q, c.k, c.v, c.attn, cache.content, dq, dk, dv);
    linalg::matmul_tn_acc(c.h1, dq, gl.query.weight);
    linalg::add_column_sums(dq, gl.query.bias);
    linalg::matmul_tn_acc(c.h1, dk, gl.key.weight);
    linalg::add_column_sums(dk, gl.key.bias);
    linalg::matmul_tn_acc(c.h1, dv, gl.value.weight);
    linalg::add_column_sums(dv, gl.value.bias);
    linalg::matmul(dq, t.query, nullptr, dh);
    linalg::matmul(dk, t.key, nullptr, tmp);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += tmp[i];
    linalg::matmul(dv, t.value, nullptr, tmp);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += tmp[i];
    layer_norm_backward(dh, w.attention_norm, c.xhat1, c.rstd1, gl.attention_norm, dx);
  }

  for (std::size_t i = 0; i < rows; ++i) {
    const double* dr = dx.row(i);
    double* te = grad.token_embedding.row(static_cast<std::size_t>(ids[i]));
    double* pe = grad.position_embedding.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      te[j] += dr[j];
      pe[j] += dr[j];
    }
  }
}

void check_sequence(const Parameters& p, const TokenSequence& seq, std::size_t rows) {
  if (seq.length < 1 || seq.length > rows || rows > p.config.max_len || seq.ids.size() < rows) {
    throw Error(ErrorKind::ShapeMismatch,
                "sequence of length " + std::to_string(seq.length) + " does not fit " +
                    std::to_string(rows) + " rows (max_len " + std::to_string(p.config.max_len) +
                    ")");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (seq.ids[i] < 0 || static_cast<std::size_t>(seq.ids[i]) >= p.config.vocab_size) {
      throw Error(ErrorKind::VocabMismatch, "token id " + std::to_string(seq.ids[i]) +
                                                " outside model vocabulary of " +
                                                std::to_string(p.config.vocab_size));
    }
  }
}

void check_targets(const TokenSequence& seq, const MaskedTargets& t, std::size_t vocab) {
  if (t.positions.size() != t.token_ids.size()) {
    throw Error(ErrorKind::ShapeMismatch, "masked positions and targets differ in length");
  }
  for (std::size_t m = 0; m < t.positions.size(); ++m) {
    if (t.positions[m] >= seq.length) {
      throw Error(ErrorKind::ShapeMismatch, "masked position outside sequence content");
    }
    if (t.token_ids[m] < 0 || static_cast<std::size_t>(t.token_ids[m]) >= vocab) {
      throw Error(ErrorKind::VocabMismatch, "target id outside model vocabulary");
    }
  }
}

std::optional<std::uint64_t> sequence_dropout_seed(std::optional<std::uint64_t> batch_seed,
                                                   std::size_t index) {
  if (!batch_seed) return std::nullopt;
  return derive_seed(*batch_seed, {stream_tag("dropout.sequence"), index});
}

// Head over the masked rows of one encoded sequence: accumulates the loss sum
// and, when grad is non-null, backpropagates with 1/denominator scaling.
double head_loss(const Parameters& p, const TransposedWeights* wt, std::span<const TokenId> ids,
                 const SequenceCache& cache, const MaskedTargets& t, double denominator,
                 Parameters* grad) {
  const std::size_t d = p.config.d_model, vocab = p.config.vocab_size, m = t.positions.size();
  if (m == 0) return 0.0;
  Tensor hsel = Tensor::matrix(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(cache.hf.row(t.positions[r]), d, hsel.row(r));
  }
  Tensor logits;
  linalg::matmul(hsel, p.head.weight, &p.head.bias, logits);
  Tensor dlogits = Tensor::matrix(m, vocab);
  double loss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    double* lp = dlogits.row(r);
    log_softmax({logits.row(r), vocab}, {lp, vocab});
    const auto target = static_cast<std::size_t>(t.token_ids[r]);
    loss -= lp[target];
    for (std::size_t v = 0; v < vocab; ++v) lp[v] = std::exp(lp[v]) / denominator;
    lp[target] -= 1.0 / denominator;
  }
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::NonFiniteActivation, "non-finite masked log-likelihood");
  }
  if (grad) {
    linalg::matmul_tn_acc(hsel, dlogits, grad->head.weight);
    linalg::add_column_sums(dlogits, grad->head.bias);
    Tensor dsel;
    linalg::matmul(dlogits, wt->head, nullptr, dsel);
    Tensor dhf = Tensor::matrix(cache.rows, d);
    for (std::size_t r = 0; r < m; ++r) {
      double* dst = dhf.row(t.positions[r]);
      const double* src = dsel.row(r);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    encode_backward(p, *wt, ids, cache, dhf, *grad);
  }
  return loss;
}

void add_into(Parameters& acc, const Parameters& other) {
  std::vector<const Tensor*> src;
  other.for_each([&](const std::string&, const Tensor& t) { src.push_back(&t); });
  std::size_t i = 0;
  acc.for_each([&](const std::string&, Tensor& t) {
    const Tensor& s = *src[i++];
    for (std::size_t k = 0; k < t.size(); ++k) t[k] += s[k];
  });
}

}  // namespace

ForwardOutput forward(const Parameters& params, std::span<const TokenSequence> batch,
                      bool train_mode, std::uint64_t seed) {
  ForwardOutput out;
  if (batch.empty()) return out;
  const std::size_t rows = batch.front().ids.size();
  for (const auto& seq : batch) {
    if (seq.ids.size() != rows) {
      throw Error(ErrorKind::ShapeMismatch, "batch sequences are not padded to a common length");
    }
    check_sequence(params, seq, rows);
  }
  const std::size_t vocab = params.config.vocab_size;
  out.common_len = rows;
  out.logits.resize(batch.size());
  out.probabilities.resize(batch.size());
  SequenceCache cache;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& seq = batch[b];
    const auto dropout = train_mode ? sequence_dropout_seed(seed, b) : std::nullopt;
    encode(params, {seq.ids.data(), rows}, seq.length, dropout, cache);
    linalg::matmul(cache.hf, params.head.weight, &params.head.bias, out.logits[b]);
    Tensor& probs = out.probabilities[b];
    probs.resize(rows, vocab);
    for (std::size_t i = 0; i < rows; ++i) {
      log_softmax({out.logits[b].row(i), vocab}, {probs.row(i), vocab});
      for (std::size_t v = 0; v < vocab; ++v) {
        probs(i, v) = std::exp(probs(i, v));
        if (!std::isfinite(out.logits[b](i, v))) {
          throw Error(ErrorKind::NonFiniteActivation, "non-finite logit");
        }
      }
    }
  }
  return out;
}

double mlm_loss(const ForwardOutput& out, std::span<const MaskedTargets> targets) {
  if (targets.size() != out.logits.size()) {
    throw Error(ErrorKind::ShapeMismatch, "one MaskedTargets per sequence is required");
  }
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> lp;
  for (std::size_t b = 0; b < targets.size(); ++b) {
    const auto& t = targets[b];
    const Tensor& logits = out.logits[b];
    lp.resize(logits.cols());
    for (std::size_t m = 0; m < t.positions.size(); ++m) {
      log_softmax({logits.row(t.positions[m]), logits.cols()}, lp);
      total -= lp[static_cast<std::size_t>(t.token_ids[m])];
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorKind::NoMaskedPositions, "no masked positions in batch");
  return total / static_cast<double>(count);
}

LossAndGradient loss_and_gradient(const Parameters& params, std::span<const TokenSequence> batch,
                                  std::span<const MaskedTargets> targets,
                                  const GradientOptions& options) {
  if (targets.size() != batch.size()) {
    throw Error(ErrorKind::ShapeMismatch, "one MaskedTargets per sequence is required");
  }
  std::size_t masked = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    check_sequence(params, batch[b], batch[b].length);
    check_targets(batch[b], targets[b], params.config.vocab_size);
    masked += targets[b].positions.size();
  }
  if (masked == 0) throw Error(ErrorKind::NoMaskedPositions, "no masked positions in batch");

  const TransposedWeights wt(params);
  const std::size_t shards = std::max<std::size_t>(1, std::min(options.shards, batch.size()));
  std::vector<Parameters> shard_grads(shards);
  std::vector<double> shard_loss(shards, 0.0);
  const double denom = static_cast<double>(masked);

  parallel_for(shards, options.threads, [&](std::size_t s) {
    const std::size_t begin = s * batch.size() / shards;
    const std::size_t end = (s + 1) * batch.size() / shards;
    shard_grads[s] = Parameters::zeros(params.config);
    SequenceCache cache;
    for (std::size_t b = begin; b < end; ++b) {
      const auto& seq = batch[b];
      const std::span<const TokenId> ids(seq.ids.data(), seq.length);
      encode(params, ids, seq.length, sequence_dropout_seed(options.dropout_seed, b), cache);
      shard_loss[s] += head_loss(params, &wt, ids, cache, targets[b], denom, &shard_grads[s]);
    }
  });

  LossAndGradient result;
  result.masked = masked;
  result.gradient = std::move(shard_grads[0]);
  double loss = shard_loss[0];
  for (std::size_t s = 1; s < shards; ++s) {
    add_into(result.gradient, shard_grads[s]);
    loss += shard_loss[s];
  }
  result.loss = loss / denom;
  if (!std::isfinite(result.loss)) throw Error(ErrorKind::NonFiniteActivation, "non-finite loss");
  if (!result.gradient.all_finite()) {
    throw Error(ErrorKind::NonFiniteGradient, "non-finite gradient");
  }
  return result;
}

Parameters backward(const Parameters& params, std::span<const TokenSequence> batch,
                    std::span<const MaskedTargets> targets) {
  GradientOptions options;
  options.shards = 1;
  return loss_and_gradient(params, batch, targets, options).gradient;
}

std::vector<double> masked_log_probs(const Parameters& params, const TokenSequence& masked,
                                     const MaskedTargets& targets) {
  return masked_log_probs_batch(params, {&masked, 1}, {&targets, 1}).front();
}

std::vector<std::vector<double>> masked_log_probs_batch(const Parameters& params,
                                                        std::span<const TokenSequence> masked,
                                                        std::span<const MaskedTargets> targets) {
  if (targets.size() != masked.size()) {
    throw Error(ErrorKind::ShapeMismatch, "one MaskedTargets per sequence is required");
  }
  std::size_t rows = 0;
  for (const auto& seq : masked) rows = std::max(rows, seq.length);
  const std::size_t vocab = params.config.vocab_size;
  std::vector<std::vector<double>> out(masked.size());
  std::vector<TokenId> ids(rows);
  std::vector<double> lp(vocab);
  SequenceCache cache;
  for (std::size_t b = 0; b < masked.size(); ++b) {
    const auto& seq = masked[b];
    check_sequence(params, seq, seq.length);
    check_targets(seq, targets[b], vocab);
    std::copy_n(seq.ids.begin(), seq.length, ids.begin());
    std::fill(ids.begin() + static_cast<std::ptrdiff_t>(seq.length), ids.end(), special::kPad);
    encode(params, ids, seq.length, std::nullopt, cache);
    const auto& t = targets[b];
    Tensor hsel = Tensor::matrix(t.positions.size(), params.config.d_model);
    for (std::size_t r = 0; r < t.positions.size(); ++r) {
      std::copy_n(cache.hf.row(t.positions[r]), params.config.d_model, hsel.row(r));
    }
    Tensor logits;
    linalg::matmul(hsel, params.head.weight, &params.head.bias, logits);
    for (std::size_t r = 0; r < t.positions.size(); ++r) {
      log_softmax({logits.row(r), vocab}, lp);
      const double v = lp[static_cast<std::size_t>(t.token_ids[r])];
      if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteActivation, "non-finite logit");
      out[b].push_back(v);
    }
  }
  return out;
}

}  // namespace adalog
