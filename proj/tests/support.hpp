#pragma once

// Test-side oracles: deliberately naive re-derivations that share no code with
// the library paths they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "adalog/model.hpp"
#include "adalog/rng.hpp"
#include "adalog/tokenize.hpp"

namespace adalog::testing {

inline ModelConfig tiny_config(std::size_t vocab = 20, std::size_t d_model = 16,
                               std::size_t heads = 1, std::size_t layers = 1,
                               std::size_t d_ff = 32, std::size_t max_len = 8) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = d_model;
  c.n_heads = heads;
  c.n_layers = layers;
  c.d_ff = d_ff;
  c.max_len = max_len;
  c.dropout_rate = 0.0;
  return c;
}

inline TokenSequence make_seq(std::vector<TokenId> content, std::size_t max_len,
                              std::uint64_t line = 0) {
  TokenSequence s;
  s.length = content.size();
  s.ids = std::move(content);
  s.ids.resize(max_len, special::kPad);
  s.raw_ref = {"test", line};
  return s;
}

/// init_params plus perturbed gains, offsets and biases, so that every tensor
/// has a non-trivial gradient.
inline Parameters perturbed_params(const ModelConfig& cfg, std::uint64_t seed) {
  Parameters p = init_params(cfg, seed);
  Rng rng(seed ^ 0x5eedULL);
  p.for_each([&](const std::string& name, Tensor& t) {
    const bool gain = name.ends_with(".gain");
    const bool shift = name.ends_with(".offset") || name.ends_with(".bias");
    if (!gain && !shift) return;
    for (double& v : t.values()) v = (gain ? 1.0 : 0.0) + rng.uniform(-0.2, 0.2);
  });
  return p;
}

/// Straight-line encoder forward for one sequence: logits for every content row.
inline std::vector<std::vector<double>> reference_logits(const Parameters& p,
                                                         const std::vector<TokenId>& ids) {
  const auto& c = p.config;
  const std::size_t n = ids.size(), d = c.d_model, dh = d / c.n_heads;
  using Mat = std::vector<std::vector<double>>;
  auto lin = [](const Mat& x, const Tensor& w, const Tensor& b) {
    Mat y(x.size(), std::vector<double>(w.cols()));
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t o = 0; o < w.cols(); ++o) {
        double s = b[o];
        for (std::size_t k = 0; k < w.rows(); ++k) s += x[i][k] * w(k, o);
        y[i][o] = s;
      }
    return y;
  };
  auto norm = [](const Mat& x, const Norm& g) {
    Mat y = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double mu = 0, var = 0;
      for (double v : x[i]) mu += v;
      mu /= static_cast<double>(x[i].size());
      for (double v : x[i]) var += (v - mu) * (v - mu);
      var /= static_cast<double>(x[i].size());
      for (std::size_t j = 0; j < x[i].size(); ++j) {
        y[i][j] = g.gain[j] * (x[i][j] - mu) / std::sqrt(var + 1e-5) + g.offset[j];
      }
    }
    return y;
  };
  Mat x(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      x[i][j] = p.token_embedding(static_cast<std::size_t>(ids[i]), j) + p.position_embedding(i, j);
  for (const auto& L : p.layers) {
    const Mat h = norm(x, L.attention_norm);
    const Mat q = lin(h, L.query.weight, L.query.bias);
    const Mat k = lin(h, L.key.weight, L.key.bias);
    const Mat v = lin(h, L.value.weight, L.value.bias);
    Mat ctx(n, std::vector<double>(d, 0.0));
    for (std::size_t hd = 0; hd < c.n_heads; ++hd) {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> w(n);
        double total = 0;
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0;
          for (std::size_t e = 0; e < dh; ++e) s += q[i][hd * dh + e] * k[j][hd * dh + e];
          w[j] = std::exp(s / std::sqrt(static_cast<double>(dh)));
          total += w[j];
        }
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t e = 0; e < dh; ++e) ctx[i][hd * dh + e] += w[j] / total * v[j][hd * dh + e];
      }
    }
    const Mat a = lin(ctx, L.output.weight, L.output.bias);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) x[i][j] += a[i][j];
    Mat u = lin(norm(x, L.ffn_norm), L.ffn_input.weight, L.ffn_input.bias);
    for (auto& row : u)
      for (double& z : row) {
        z = 0.5 * z * (1 + std::tanh(std::sqrt(2 / M_PI) * (z + 0.044715 * z * z * z)));
      }
    const Mat f = lin(u, L.ffn_output.weight, L.ffn_output.bias);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) x[i][j] += f[i][j];
  }
  return lin(norm(x, p.final_norm), p.head.weight, p.head.bias);
}

/// -ln softmax(logits)[target], computed the textbook way.
inline double reference_nll(const std::vector<double>& logits, std::size_t target) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double v : logits) z += std::exp(v - mx);
  return -(logits[target] - mx - std::log(z));
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::map<std::string, std::size_t> per_tensor;  // canonical name -> samples
  std::string worst;
};

/// Central differences of mlm_loss(forward(...)) against backward() on a
/// seeded sample of coordinates from every tensor.
inline GradCheck gradient_check(const Parameters& params, const std::vector<TokenSequence>& batch,
                                const std::vector<MaskedTargets>& targets, double step,
                                std::size_t per_tensor, std::uint64_t seed) {
  const Parameters grad = backward(params, batch, targets);
  std::vector<std::pair<std::string, const Tensor*>> grads;
  grad.for_each([&](const std::string& n, const Tensor& t) { grads.emplace_back(n, &t); });

  Parameters probe = params;
  std::vector<std::pair<std::string, Tensor*>> tensors;
  probe.for_each([&](const std::string& n, Tensor& t) { tensors.emplace_back(n, &t); });

  auto loss = [&]() { return mlm_loss(forward(probe, batch), targets); };
  Rng rng(seed);
  GradCheck out;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Tensor& tensor = *tensors[t].second;
    const std::size_t picks = std::min(per_tensor, tensor.size());
    for (std::size_t s = 0; s < picks; ++s) {
      const std::size_t i = rng.below(tensor.size());
      const double saved = tensor[i];
      tensor[i] = saved + step;
      const double up = loss();
      tensor[i] = saved - step;
      const double down = loss();
      tensor[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double analytic = (*grads[t].second)[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = tensors[t].first + "[" + std::to_string(i) + "]";
      }
      ++out.coordinates;
      ++out.per_tensor[tensors[t].first];
    }
  }
  return out;
}

/// Sort, then interpolate between the order statistics around (n - 1) p / 100.
inline double quantile_oracle(std::vector<double> xs, double percentile) {
  std::sort(xs.begin(), xs.end());
  const double h = static_cast<double>(xs.size() - 1) * percentile / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= xs.size()) return xs[lo];
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

/// One full padded forward per position with only that position masked.
inline double brute_force_token_score(const Parameters& p, const TokenSequence& seq) {
  double total = 0;
  for (std::size_t pos = 0; pos < seq.length; ++pos) {
    TokenSequence masked = seq;
    masked.ids[pos] = special::kMask;
    const auto out = forward(p, {&masked, 1});
    const double prob = out.probabilities[0](pos, static_cast<std::size_t>(seq.ids[pos]));
    total -= std::log(std::max(prob, 1e-12));
  }
  return total / static_cast<double>(seq.length);
}

}  // namespace adalog::testing
