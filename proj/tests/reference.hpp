#pragma once

// Plain-double evaluations of the attention formulas, written without the
// tape ops so tests can compare against them.

#include <algorithm>
#include <cmath>
#include <vector>

#include "tcat/attention/cwa.hpp"
#include "tcat/diff/mlp.hpp"

namespace ref {

using tcat::attn::CWAParams;
using tcat::diff::MLPParams;
using tcat::diff::Tensor;

using Vec = std::vector<double>;

inline Vec mlp_ref(const MLPParams& mlp, Vec x) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& W = mlp.layers[l].weight;
    const auto& b = mlp.layers[l].bias;
    Vec y(W.dim(1));
    for (std::size_t o = 0; o < y.size(); ++o) {
      double s = b.data()[o];
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * W.at(i, o);
      y[o] = (l + 1 < mlp.layers.size()) ? std::max(0.0, s) : s;
    }
    x = std::move(y);
  }
  return x;
}

// f_q' = sum_k softmax_k(w_gate(df + w_pos(dx))) * df, channel by channel.
inline Vec cwa_ref(const CWAParams& p, const Vec& xq, const Vec& fq, const std::vector<Vec>& xk,
            const std::vector<Vec>& fk) {
  const std::size_t C = fq.size();
  std::vector<Vec> logits, deltas;
  for (std::size_t k = 0; k < xk.size(); ++k) {
    Vec dx{xq[0] - xk[k][0], xq[1] - xk[k][1], xq[2] - xk[k][2]};
    Vec df(C);
    for (std::size_t c = 0; c < C; ++c) df[c] = fq[c] - fk[k][c];
    const Vec pos = mlp_ref(p.w_pos, dx);
    Vec in(C);
    for (std::size_t c = 0; c < C; ++c) in[c] = df[c] + pos[c];
    logits.push_back(mlp_ref(p.w_gate, in));
    deltas.push_back(df);
  }
  Vec out(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double mx = -1e300;
    for (const auto& l : logits) mx = std::max(mx, l[c]);
    double z = 0.0;
    for (const auto& l : logits) z += std::exp(l[c] - mx);
    for (std::size_t k = 0; k < logits.size(); ++k) {
      out[c] += std::exp(logits[k][c] - mx) / z * deltas[k][c];
    }
  }
  return out;
}

inline Vec row(const Tensor& t, std::size_t r) {
  const std::size_t w = t.dim(1);
  return Vec(t.data().begin() + r * w, t.data().begin() + (r + 1) * w);
}

inline std::vector<Vec> rows(const Tensor& t) {
  std::vector<Vec> out;
  for (std::size_t r = 0; r < t.dim(0); ++r) out.push_back(row(t, r));
  return out;
}

inline Vec softmax(const Vec& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  Vec out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += out[i] = std::exp(x[i] - mx);
  for (double& v : out) v /= z;
  return out;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace ref
