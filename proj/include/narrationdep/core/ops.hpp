#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "narrationdep/core/error.hpp"
#include "narrationdep/core/rng.hpp"
#include "narrationdep/core/tensor.hpp"

namespace narrationdep {

using Mask = std::vector<bool>;

inline Mask full_mask(std::size_t n) { return Mask(n, true); }

// ---------------------------------------------------------------------------
// Span kernels. Matrices are row-major [rows x cols]; callers own the shapes.

/// out += W x
inline void matvec_acc(std::span<const Real> W, std::size_t rows, std::size_t cols,
                       std::span<const Real> x, std::span<Real> out) {
  for (std::size_t i = 0; i < rows; ++i) {
    const Real* w = W.data() + i * cols;
    Real acc = 0;
    for (std::size_t j = 0; j < cols; ++j) acc += w[j] * x[j];
    out[i] += acc;
  }
}

/// out += W^T g
inline void matvec_t_acc(std::span<const Real> W, std::size_t rows, std::size_t cols,
                         std::span<const Real> g, std::span<Real> out) {
  for (std::size_t i = 0; i < rows; ++i) {
    const Real* w = W.data() + i * cols;
    const Real gi = g[i];
    if (gi == Real(0)) continue;
    for (std::size_t j = 0; j < cols; ++j) out[j] += w[j] * gi;
  }
}

/// dW += g x^T
inline void outer_acc(std::span<const Real> g, std::span<const Real> x, std::span<Real> dW) {
  const std::size_t cols = x.size();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Real gi = g[i];
    if (gi == Real(0)) continue;
    Real* d = dW.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) d[j] += gi * x[j];
  }
}

inline Real dot(std::span<const Real> a, std::span<const Real> b) {
  Real acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(Real alpha, std::span<const Real> x, std::span<Real> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Real sigmoid(Real x) {
  if (x >= 0) {
    const Real e = std::exp(-x);
    return Real(1) / (Real(1) + e);
  }
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

// ---------------------------------------------------------------------------
// Tensor-level operations.

/// W x + b for x:[n], W:[m x n], b:[m].
inline Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (W.rank() != 2 || x.rank() != 1 || b.rank() != 1 || W.cols() != x.size() ||
      W.rows() != b.size()) {
    throw DimensionError("affine: incompatible shapes x=" + shape_string(x.shape()) +
                         " W=" + shape_string(W.shape()) + " b=" + shape_string(b.shape()));
  }
  Tensor out = b;
  matvec_acc(W.data(), W.rows(), W.cols(), x.data(), out.data());
  return out;
}

/// Softmax restricted to positions where mask is true; masked positions are
/// exactly zero. Uses max-subtraction over the kept positions.
inline Vec masked_softmax(std::span<const Real> logits, const Mask& mask) {
  if (mask.size() != logits.size()) {
    throw DimensionError("masked_softmax: mask length " + std::to_string(mask.size()) +
                         " vs logits length " + std::to_string(logits.size()));
  }
  bool any = false;
  Real mx = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    if (!any || logits[i] > mx) mx = logits[i];
    any = true;
  }
  if (!any) throw EmptySupportError("masked_softmax: mask selects no positions");
  Vec out(logits.size(), Real(0));
  Real total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

inline Tensor masked_softmax(const Tensor& logits, const Mask& mask) {
  return Tensor::vector(masked_softmax(logits.data(), mask));
}

/// Backward of softmax given its output: dlogit_i = w_i (dw_i - sum_j w_j dw_j).
/// Masked positions have w_i == 0 and therefore receive zero gradient.
inline Vec softmax_backward(std::span<const Real> weights, std::span<const Real> dweights) {
  const Real s = dot(weights, dweights);
  Vec d(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) d[i] = weights[i] * (dweights[i] - s);
  return d;
}

/// Glorot-uniform draw in +-sqrt(6 / (fan_in + fan_out)). For a matrix
/// [out x in], fan_in = in and fan_out = out; a vector of length n is treated
/// as [1 x n]. Biases are not drawn here; they start at zero.
inline Tensor xavier_init(const Shape& shape, std::uint64_t seed) {
  Tensor t(shape);
  const double fan_out = shape.size() >= 2 ? static_cast<double>(shape[0]) : 1.0;
  const double fan_in = shape.size() >= 2 ? static_cast<double>(shape_size(shape) / shape[0])
                                          : static_cast<double>(shape_size(shape));
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Rng rng(seed);
  for (auto& v : t.values()) v = static_cast<Real>(rng.uniform(-bound, bound));
  return t;
}

inline bool all_finite(std::span<const Real> v) {
  return std::all_of(v.begin(), v.end(), [](Real x) { return std::isfinite(x); });
}

}  // namespace narrationdep
