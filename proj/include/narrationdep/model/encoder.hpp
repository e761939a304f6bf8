#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "narrationdep/core/error.hpp"
#include "narrationdep/core/ops.hpp"
#include "narrationdep/core/rng.hpp"
#include "narrationdep/core/tensor.hpp"

namespace narrationdep {

template <class P, class T>
concept ParamsOf = std::same_as<std::remove_const_t<P>, T>;

/// Reset/update-gate GRU weights for one direction.
///   z  = sigmoid(W_z x + U_z h + b_z)
///   r  = sigmoid(W_r x + U_r h + b_r)
///   h~ = tanh(W_h x + U_h (r * h) + b_h)
///   h' = (1 - z) * h + z * h~
struct GruParams {
  Tensor Wz, Wr, Wh;  // [d_h x d_in]
  Tensor Uz, Ur, Uh;  // [d_h x d_h]
  Tensor bz, br, bh;  // [d_h]

  std::size_t d_in() const noexcept { return Wz.cols(); }
  std::size_t d_h() const noexcept { return Wz.rows(); }

  static GruParams init(std::size_t d_in, std::size_t d_h, std::uint64_t seed) {
    GruParams p;
    p.Wz = xavier_init({d_h, d_in}, derive_seed(seed, "Wz"));
    p.Wr = xavier_init({d_h, d_in}, derive_seed(seed, "Wr"));
    p.Wh = xavier_init({d_h, d_in}, derive_seed(seed, "Wh"));
    p.Uz = xavier_init({d_h, d_h}, derive_seed(seed, "Uz"));
    p.Ur = xavier_init({d_h, d_h}, derive_seed(seed, "Ur"));
    p.Uh = xavier_init({d_h, d_h}, derive_seed(seed, "Uh"));
    p.bz = Tensor({d_h});
    p.br = Tensor({d_h});
    p.bh = Tensor({d_h});
    return p;
  }
};

template <ParamsOf<GruParams> P, class F>
void visit_params(P& p, const std::string& prefix, F&& f) {
  f(prefix + ".W_z", p.Wz);
  f(prefix + ".W_r", p.Wr);
  f(prefix + ".W_h", p.Wh);
  f(prefix + ".U_z", p.Uz);
  f(prefix + ".U_r", p.Ur);
  f(prefix + ".U_h", p.Uh);
  f(prefix + ".b_z", p.bz);
  f(prefix + ".b_r", p.br);
  f(prefix + ".b_h", p.bh);
}

struct BiGruParams {
  GruParams fwd;
  GruParams bwd;

  std::size_t d_in() const noexcept { return fwd.d_in(); }
  std::size_t d_h() const noexcept { return fwd.d_h(); }

  static BiGruParams init(std::size_t d_in, std::size_t d_h, std::uint64_t seed) {
    return {GruParams::init(d_in, d_h, derive_seed(seed, "fwd")),
            GruParams::init(d_in, d_h, derive_seed(seed, "bwd"))};
  }
};

template <ParamsOf<BiGruParams> P, class F>
void visit_params(P& p, const std::string& prefix, F&& f) {
  visit_params(p.fwd, prefix + ".fwd", f);
  visit_params(p.bwd, prefix + ".bwd", f);
}

/// Additive attention: score_i = u . tanh(W h_i + b).
struct AttentionParams {
  Tensor W;  // [d_a x d_in]
  Tensor b;  // [d_a]
  Tensor u;  // [d_a] context vector

  static AttentionParams init(std::size_t d_in, std::size_t d_a, std::uint64_t seed) {
    return {xavier_init({d_a, d_in}, derive_seed(seed, "W")), Tensor({d_a}),
            xavier_init({d_a}, derive_seed(seed, "u"))};
  }
};

template <ParamsOf<AttentionParams> P, class F>
void visit_params(P& p, const std::string& prefix, F&& f) {
  f(prefix + ".W", p.W);
  f(prefix + ".b", p.b);
  f(prefix + ".u", p.u);
}

/// Copy of `p` with every tensor zeroed; used as a gradient accumulator.
template <class P>
P zeros_like(const P& p) {
  P g = p;
  visit_params(g, "", [](const std::string&, Tensor& t) { t.fill(Real(0)); });
  return g;
}

// ---------------------------------------------------------------------------
// GRU cell

struct GruStep {
  Vec x, h_prev, z, r, h_tilde, h;
};

inline void require_gru_shapes(std::size_t x_len, std::size_t h_len, const GruParams& p) {
  if (x_len != p.d_in() || h_len != p.d_h()) {
    throw DimensionError("gru_cell: x has length " + std::to_string(x_len) + " and h_prev " +
                         std::to_string(h_len) + ", parameters expect d_in=" + std::to_string(p.d_in()) +
                         " d_h=" + std::to_string(p.d_h()));
  }
}

inline Vec gru_cell(std::span<const Real> x, std::span<const Real> h_prev, const GruParams& p,
                    GruStep* cache = nullptr) {
  require_gru_shapes(x.size(), h_prev.size(), p);
  const std::size_t dh = p.d_h(), din = p.d_in();
  Vec z(p.bz.values()), r(p.br.values()), a(p.bh.values());
  matvec_acc(p.Wz.data(), dh, din, x, z);
  matvec_acc(p.Uz.data(), dh, dh, h_prev, z);
  matvec_acc(p.Wr.data(), dh, din, x, r);
  matvec_acc(p.Ur.data(), dh, dh, h_prev, r);
  Vec rh(dh);
  for (std::size_t i = 0; i < dh; ++i) {
    z[i] = sigmoid(z[i]);
    r[i] = sigmoid(r[i]);
    rh[i] = r[i] * h_prev[i];
  }
  matvec_acc(p.Wh.data(), dh, din, x, a);
  matvec_acc(p.Uh.data(), dh, dh, rh, a);
  Vec h(dh);
  for (std::size_t i = 0; i < dh; ++i) {
    a[i] = std::tanh(a[i]);
    h[i] = (Real(1) - z[i]) * h_prev[i] + z[i] * a[i];
  }
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev.assign(h_prev.begin(), h_prev.end());
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->h_tilde = std::move(a);
    cache->h = h;
  }
  return h;
}

inline Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruParams& p) {
  return Tensor::vector(gru_cell(x.data(), h_prev.data(), p));
}

/// Accumulates parameter gradients into `g` and writes (accumulates) the
/// input and previous-state gradients into dx and dh_prev.
inline void gru_cell_backward(const GruStep& s, const GruParams& p, std::span<const Real> dh, GruParams& g,
                              std::span<Real> dx, std::span<Real> dh_prev) {
  const std::size_t dh_n = p.d_h(), din = p.d_in();
  Vec da_h(dh_n), da_z(dh_n), da_r(dh_n);
  for (std::size_t i = 0; i < dh_n; ++i) {
    const Real ht = s.h_tilde[i], z = s.z[i];
    dh_prev[i] += dh[i] * (Real(1) - z);
    da_h[i] = dh[i] * z * (Real(1) - ht * ht);
    da_z[i] = dh[i] * (ht - s.h_prev[i]) * z * (Real(1) - z);
  }
  Vec rh(dh_n);
  for (std::size_t i = 0; i < dh_n; ++i) rh[i] = s.r[i] * s.h_prev[i];

  outer_acc(da_h, s.x, g.Wh.data());
  outer_acc(da_h, rh, g.Uh.data());
  axpy(Real(1), da_h, g.bh.data());
  matvec_t_acc(p.Wh.data(), dh_n, din, da_h, dx);
  Vec drh(dh_n, Real(0));
  matvec_t_acc(p.Uh.data(), dh_n, dh_n, da_h, drh);
  for (std::size_t i = 0; i < dh_n; ++i) {
    dh_prev[i] += drh[i] * s.r[i];
    da_r[i] = drh[i] * s.h_prev[i] * s.r[i] * (Real(1) - s.r[i]);
  }

  outer_acc(da_z, s.x, g.Wz.data());
  outer_acc(da_z, s.h_prev, g.Uz.data());
  axpy(Real(1), da_z, g.bz.data());
  matvec_t_acc(p.Wz.data(), dh_n, din, da_z, dx);
  matvec_t_acc(p.Uz.data(), dh_n, dh_n, da_z, dh_prev);

  outer_acc(da_r, s.x, g.Wr.data());
  outer_acc(da_r, s.h_prev, g.Ur.data());
  axpy(Real(1), da_r, g.br.data());
  matvec_t_acc(p.Wr.data(), dh_n, din, da_r, dx);
  matvec_t_acc(p.Ur.data(), dh_n, dh_n, da_r, dh_prev);
}

// ---------------------------------------------------------------------------
// Bidirectional encoding

/// Row i is [forward state ; backward state] at position i; masked rows are zero.
struct EncodedSequence {
  Tensor states;  // [n x 2 d_h]
  Mask mask;

  std::size_t length() const noexcept { return states.rows(); }
};

struct BiGruCache {
  std::vector<GruStep> fwd;  // by position; unused where masked
  std::vector<GruStep> bwd;
};

/// Forward pass left-to-right and backward pass right-to-left, both from
/// zero states. Masked positions are skipped and the state carries over them.
inline EncodedSequence bigru_encode(const Tensor& xs, const BiGruParams& p, const Mask& mask,
                                    BiGruCache* cache = nullptr) {
  const std::size_t n = xs.rows();
  if (xs.empty() || n == 0) throw PreconditionError("bigru_encode: empty sequence");
  if (mask.size() != n) throw DimensionError("bigru_encode: mask length does not match sequence length");
  if (xs.cols() != p.d_in()) {
    throw DimensionError("bigru_encode: input width " + std::to_string(xs.cols()) + " vs d_in " +
                         std::to_string(p.d_in()));
  }
  const std::size_t dh = p.d_h();
  EncodedSequence out{Tensor({n, 2 * dh}), mask};
  if (cache) {
    cache->fwd.assign(n, {});
    cache->bwd.assign(n, {});
  }
  Vec h(dh, Real(0));
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    h = gru_cell(xs.row(i), h, p.fwd, cache ? &cache->fwd[i] : nullptr);
    std::copy(h.begin(), h.end(), out.states.row(i).begin());
  }
  h.assign(dh, Real(0));
  for (std::size_t i = n; i-- > 0;) {
    if (!mask[i]) continue;
    h = gru_cell(xs.row(i), h, p.bwd, cache ? &cache->bwd[i] : nullptr);
    std::copy(h.begin(), h.end(), out.states.row(i).begin() + static_cast<std::ptrdiff_t>(dh));
  }
  return out;
}

inline EncodedSequence bigru_encode(const Tensor& xs, const BiGruParams& p) {
  return bigru_encode(xs, p, full_mask(xs.rows()));
}

/// Backward of bigru_encode. dstates is [n x 2 d_h]; returns dxs [n x d_in].
inline Tensor bigru_backward(const BiGruCache& cache, const BiGruParams& p, const Mask& mask,
                             const Tensor& dstates, BiGruParams& g) {
  const std::size_t n = dstates.rows(), dh = p.d_h();
  Tensor dxs({n, p.d_in()});
  Vec carry(dh, Real(0)), dh_total(dh), dprev(dh);
  for (std::size_t i = n; i-- > 0;) {
    if (!mask[i]) continue;
    auto ds = dstates.row(i);
    for (std::size_t k = 0; k < dh; ++k) dh_total[k] = ds[k] + carry[k];
    std::fill(dprev.begin(), dprev.end(), Real(0));
    gru_cell_backward(cache.fwd[i], p.fwd, dh_total, g.fwd, dxs.row(i), dprev);
    carry = dprev;
  }
  std::fill(carry.begin(), carry.end(), Real(0));
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    auto ds = dstates.row(i);
    for (std::size_t k = 0; k < dh; ++k) dh_total[k] = ds[dh + k] + carry[k];
    std::fill(dprev.begin(), dprev.end(), Real(0));
    gru_cell_backward(cache.bwd[i], p.bwd, dh_total, g.bwd, dxs.row(i), dprev);
    carry = dprev;
  }
  return dxs;
}

// ---------------------------------------------------------------------------
// Attention

struct AttentionResult {
  Vec context;
  Vec weights;
};

struct AttentionCache {
  Tensor proj;  // [n x d_a], tanh(W h_i + b); zero rows where masked
  Vec weights;
};

/// weights = masked_softmax(u . tanh(W h_i + b)); context = sum_i weights_i h_i.
inline AttentionResult attend(const EncodedSequence& seq, const AttentionParams& p,
                              AttentionCache* cache = nullptr) {
  const std::size_t n = seq.length(), din = seq.states.cols(), da = p.W.rows();
  if (p.W.cols() != din) {
    throw DimensionError("attend: state width " + std::to_string(din) + " vs projection " +
                         shape_string(p.W.shape()));
  }
  Tensor proj({n, da});
  Vec scores(n, Real(0));
  for (std::size_t i = 0; i < n; ++i) {
    if (!seq.mask[i]) continue;
    auto pr = proj.row(i);
    std::copy(p.b.values().begin(), p.b.values().end(), pr.begin());
    matvec_acc(p.W.data(), da, din, seq.states.row(i), pr);
    for (auto& v : pr) v = std::tanh(v);
    scores[i] = dot(pr, p.u.data());
  }
  AttentionResult res;
  res.weights = masked_softmax(scores, seq.mask);
  res.context.assign(din, Real(0));
  for (std::size_t i = 0; i < n; ++i)
    if (seq.mask[i]) axpy(res.weights[i], seq.states.row(i), res.context);
  if (cache) {
    cache->proj = std::move(proj);
    cache->weights = res.weights;
  }
  return res;
}

/// Backward of attend; returns dstates [n x d_in].
inline Tensor attend_backward(const EncodedSequence& seq, const AttentionCache& cache, const AttentionParams& p,
                              std::span<const Real> dcontext, AttentionParams& g) {
  const std::size_t n = seq.length(), din = seq.states.cols(), da = p.W.rows();
  Tensor dstates({n, din});
  Vec dweights(n, Real(0));
  for (std::size_t i = 0; i < n; ++i) {
    if (!seq.mask[i]) continue;
    dweights[i] = dot(dcontext, seq.states.row(i));
    axpy(cache.weights[i], dcontext, dstates.row(i));
  }
  const Vec dscores = softmax_backward(cache.weights, dweights);
  Vec dpre(da);
  for (std::size_t i = 0; i < n; ++i) {
    if (!seq.mask[i]) continue;
    auto pr = cache.proj.row(i);
    axpy(dscores[i], pr, g.u.data());
    for (std::size_t k = 0; k < da; ++k) dpre[k] = dscores[i] * p.u[k] * (Real(1) - pr[k] * pr[k]);
    outer_acc(dpre, seq.states.row(i), g.W.data());
    axpy(Real(1), dpre, g.b.data());
    matvec_t_acc(p.W.data(), da, din, dpre, dstates.row(i));
  }
  return dstates;
}

// ---------------------------------------------------------------------------
// One hierarchy level: BiGRU over a sequence followed by attention pooling.

struct LevelParams {
  BiGruParams gru;
  AttentionParams attn;

  static LevelParams init(std::size_t d_in, std::size_t d_h, std::size_t d_a, std::uint64_t seed) {
    return {BiGruParams::init(d_in, d_h, derive_seed(seed, "gru")),
            AttentionParams::init(2 * d_h, d_a, derive_seed(seed, "attn"))};
  }
};

template <ParamsOf<LevelParams> P, class F>
void visit_params(P& p, const std::string& prefix, F&& f) {
  visit_params(p.gru, prefix + ".gru", f);
  visit_params(p.attn, prefix + ".attn", f);
}

struct LevelCache {
  EncodedSequence encoded;
  BiGruCache gru;
  AttentionCache attn;
};

/// Encodes a sequence [n x d_in] into one pooled vector of width 2 d_h.
inline AttentionResult encode_level(const Tensor& xs, const LevelParams& p, LevelCache* cache = nullptr) {
  const Mask mask = full_mask(xs.rows());
  if (cache) {
    cache->encoded = bigru_encode(xs, p.gru, mask, &cache->gru);
    return attend(cache->encoded, p.attn, &cache->attn);
  }
  return attend(bigru_encode(xs, p.gru, mask), p.attn);
}

/// Returns d(inputs) [n x d_in] and accumulates parameter gradients.
inline Tensor encode_level_backward(const LevelCache& cache, const LevelParams& p, std::span<const Real> dcontext,
                                    LevelParams& g) {
  const Tensor dstates = attend_backward(cache.encoded, cache.attn, p.attn, dcontext, g.attn);
  return bigru_backward(cache.gru, p.gru, cache.encoded.mask, dstates, g.gru);
}

inline Tensor stack_rows(const std::vector<Vec>& rows) {
  if (rows.empty()) throw PreconditionError("stack_rows: no rows");
  Vec data;
  data.reserve(rows.size() * rows[0].size());
  for (const auto& r : rows) {
    if (r.size() != rows[0].size()) throw DimensionError("stack_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor::matrix(rows.size(), rows[0].size(), std::move(data));
}

}  // namespace narrationdep
