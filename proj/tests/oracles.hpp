#pragma once

// Naive reference implementations used to pin the library's fast paths.
// Everything here is a straight loop over definitions; no shared code with
// the implementations under test.

#include <cmath>
#include <cstddef>
#include <vector>

#include "mtft/tensor.hpp"

namespace oracle {

using mtft::Tensor;

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.dim(1); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  Tensor out({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) out(j, i) = a(i, j);
  return out;
}

inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor out = matmul(x, w);
  for (std::size_t i = 0; i < out.dim(0); ++i)
    for (std::size_t j = 0; j < out.dim(1); ++j) out(i, j) += b[j];
  return out;
}

// Plain exp/sum softmax, zero where the mask is zero.
inline Tensor masked_softmax(const Tensor& logits, const Tensor& mask) {
  Tensor out = Tensor::zeros(logits.shape());
  for (std::size_t i = 0; i < logits.dim(0); ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < logits.dim(1); ++j)
      if (mask(i, j) == 1.0) denom += std::exp(logits(i, j));
    for (std::size_t j = 0; j < logits.dim(1); ++j)
      if (mask(i, j) == 1.0) out(i, j) = std::exp(logits(i, j)) / denom;
  }
  return out;
}

inline Tensor softmax(const Tensor& logits) {
  Tensor ones({logits.dim(0), logits.dim(1)});
  ones.fill(1.0);
  return masked_softmax(logits, ones);
}

inline Tensor scale_attention(const Tensor& q, const Tensor& k,
                              const Tensor& v, const Tensor& mask) {
  std::size_t len = q.dim(0), d = q.dim(1);
  Tensor logits({len, len});
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < len; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += q(i, c) * k(j, c);
      logits(i, j) = acc / std::sqrt(static_cast<double>(d));
    }
  return matmul(masked_softmax(logits, mask), v);
}

inline bool scale_mask_entry(long a, long b, long scale) {
  long diff = a - b;
  return diff % scale == 0;
}

// cells(j, l) = seqmask[l] AND scalemask(j, l); increment j = row sum.
inline void observation_matrix(const std::vector<int>& seqmask,
                               const Tensor& scalemask, Tensor& cells,
                               std::vector<int>& increments) {
  std::size_t len = seqmask.size();
  cells = Tensor::zeros({len, len});
  increments.assign(len, 0);
  for (std::size_t j = 0; j < len; ++j)
    for (std::size_t l = 0; l < len; ++l)
      if (seqmask[l] == 1 && scalemask(j, l) == 1.0) {
        cells(j, l) = 1.0;
        increments[j] += 1;
      }
}

inline Tensor across_weights(const std::vector<int>& increments) {
  Tensor out({1, increments.size()});
  double denom = 0.0;
  for (int d : increments) denom += std::exp(static_cast<double>(d));
  for (std::size_t i = 0; i < increments.size(); ++i)
    out(0, i) = std::exp(static_cast<double>(increments[i])) / denom;
  return out;
}

inline Tensor continuity(const Tensor& weights, const Tensor& rep) {
  Tensor out = Tensor::zeros({1, rep.dim(1)});
  for (std::size_t d = 0; d < rep.dim(1); ++d)
    for (std::size_t l = 0; l < rep.dim(0); ++l)
      out(0, d) += weights(0, l) * rep(l, d);
  return out;
}

struct FusionWeights {
  Tensor qw, qb, kw, kb, vw, vb, ow, ob;
};

// Continuity rows query all per-scale timestep rows; attention output is
// mean-pooled and projected.
inline Tensor fuse(const std::vector<Tensor>& r_c,
                   const std::vector<Tensor>& r_m, const FusionWeights& w,
                   bool sqrt_scaling) {
  std::size_t n = r_c.size();
  std::size_t dh = r_c[0].dim(1);
  Tensor queries({n, dh});
  for (std::size_t i = 0; i < n; ++i) {
    Tensor q = affine(r_c[i], w.qw, w.qb);
    for (std::size_t d = 0; d < dh; ++d) queries(i, d) = q(0, d);
  }
  std::size_t tokens = 0;
  for (const Tensor& m : r_m) tokens += m.dim(0);
  Tensor keys({tokens, dh}), values({tokens, dh});
  std::size_t row = 0;
  for (const Tensor& m : r_m) {
    Tensor k = affine(m, w.kw, w.kb);
    Tensor v = affine(m, w.vw, w.vb);
    for (std::size_t i = 0; i < m.dim(0); ++i, ++row)
      for (std::size_t d = 0; d < dh; ++d) {
        keys(row, d) = k(i, d);
        values(row, d) = v(i, d);
      }
  }
  double dk = static_cast<double>(dh);
  double s = sqrt_scaling ? 1.0 / std::sqrt(dk) : 1.0 / dk;
  Tensor logits({n, tokens});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < tokens; ++j) {
      double acc = 0.0;
      for (std::size_t d = 0; d < dh; ++d) acc += queries(i, d) * keys(j, d);
      logits(i, j) = acc * s;
    }
  Tensor fused = matmul(softmax(logits), values);
  Tensor pooled = Tensor::zeros({1, dh});
  for (std::size_t d = 0; d < dh; ++d) {
    for (std::size_t i = 0; i < n; ++i) pooled(0, d) += fused(i, d);
    pooled(0, d) /= static_cast<double>(n);
  }
  return affine(pooled, w.ow, w.ob);
}

// s_ij = <G(e_i), G(e_j)>, row softmax including self, v = ReLU(A E W).
inline Tensor interaction(const Tensor& e, const Tensor& gw, const Tensor& gb,
                          const Tensor& w) {
  Tensor g = affine(e, gw, gb);
  Tensor scores = matmul(g, transpose(g));
  Tensor alpha = softmax(scores);
  Tensor mixed = matmul(matmul(alpha, e), w);
  for (std::size_t i = 0; i < mixed.size(); ++i)
    if (mixed[i] < 0.0) mixed[i] = 0.0;
  return mixed;
}

struct LstmWeights {
  Tensor init_h_w, init_h_b, init_c_w, init_c_b;
  Tensor w_ih, w_hh, bias;
  Tensor head_w, head_b;
};

inline Tensor lstm_decode(const Tensor& v_tar, std::size_t t_f,
                          const LstmWeights& w) {
  std::size_t hidden = w.w_hh.dim(0);
  Tensor h = affine(v_tar, w.init_h_w, w.init_h_b);
  Tensor c = affine(v_tar, w.init_c_w, w.init_c_b);
  Tensor x = Tensor::zeros({1, 2});
  Tensor out({t_f, 2});
  double px = 0.0, py = 0.0;
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (std::size_t t = 0; t < t_f; ++t) {
    Tensor z = matmul(x, w.w_ih);
    Tensor zh = matmul(h, w.w_hh);
    for (std::size_t j = 0; j < 4 * hidden; ++j)
      z(0, j) += zh(0, j) + w.bias[j];
    for (std::size_t j = 0; j < hidden; ++j) {
      double gi = sig(z(0, j));
      double gf = sig(z(0, hidden + j));
      double gg = std::tanh(z(0, 2 * hidden + j));
      double go = sig(z(0, 3 * hidden + j));
      c(0, j) = gf * c(0, j) + gi * gg;
      h(0, j) = go * std::tanh(c(0, j));
    }
    Tensor off = affine(h, w.head_w, w.head_b);
    px += off(0, 0);
    py += off(0, 1);
    out(t, 0) = px;
    out(t, 1) = py;
    x = off;
  }
  return out;
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gain,
                         const Tensor& bias, double eps = 1e-5) {
  Tensor out(x.shape());
  std::size_t cols = x.dim(1);
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mean += x(i, j);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      double d = x(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    for (std::size_t j = 0; j < cols; ++j)
      out(i, j) = (x(i, j) - mean) / std::sqrt(var + eps) * gain[j] + bias[j];
  }
  return out;
}

inline double max_abs(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
