#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "narrationdep/cluster/assignment.hpp"
#include "narrationdep/core/params.hpp"
#include "narrationdep/core/rng.hpp"
#include "narrationdep/data/dataset.hpp"
#include "narrationdep/model/hacn.hpp"
#include "narrationdep/model/han.hpp"

namespace narrationdep {

struct ModelDims {
  std::size_t d_w = 16;
  std::size_t d_h = 8;
  std::size_t d_a = 0;  // 0 means d_h
  std::size_t d_p = 0;  // 0 means 2 d_h
  bool share_word = true;

  std::size_t attention_width() const noexcept { return d_a ? d_a : d_h; }
  std::size_t projection_width() const noexcept { return d_p ? d_p : 2 * d_h; }
  std::size_t fused_width() const noexcept { return projection_width() + 2 * d_h; }

  bool operator==(const ModelDims& o) const {
    return d_w == o.d_w && d_h == o.d_h && attention_width() == o.attention_width() &&
           projection_width() == o.projection_width() && share_word == o.share_word;
  }
};

/// Which branches feed the classifier. Branch-only variants zero the other
/// branch's slice of W_f and skip its forward pass.
enum class Branches { Joint, HanOnly, HacnOnly };

enum class Mode { Train, Eval };

struct ModelParams {
  ModelDims dims;
  HanParams han;
  HacnParams hacn;
  Tensor W_f;  // [1 x (d_p + 2 d_h)], p slice first
  Tensor b_f;  // [1]

  static ModelParams init(const ModelDims& dims, std::uint64_t seed, Branches branches = Branches::Joint) {
    const std::size_t dh = dims.d_h, da = dims.attention_width(), dp = dims.projection_width();
    if (dims.d_w == 0 || dh == 0) throw ConfigError("model dimensions must be positive");
    ModelParams m;
    m.dims = dims;
    m.han.word = LevelParams::init(dims.d_w, dh, da, derive_seed(seed, "han.word"));
    m.han.tweet = LevelParams::init(2 * dh, dh, da, derive_seed(seed, "han.tweet"));
    if (!dims.share_word) m.hacn.word = LevelParams::init(dims.d_w, dh, da, derive_seed(seed, "hacn.word"));
    m.hacn.tweet = LevelParams::init(2 * dh, dh, da, derive_seed(seed, "hacn.tweet"));
    m.hacn.cluster = LevelParams::init(2 * dh, dh, da, derive_seed(seed, "hacn.cluster"));
    m.hacn.W_proj = xavier_init({dp, 2 * dh}, derive_seed(seed, "hacn.proj"));
    m.hacn.b_proj = Tensor({dp});
    m.W_f = xavier_init({1, dims.fused_width()}, derive_seed(seed, "fusion"));
    m.b_f = Tensor({1});
    m.mask_branches(branches);
    return m;
  }

  const LevelParams& hacn_word() const { return hacn.word ? *hacn.word : han.word; }

  /// Zeroes the W_f slice of any branch excluded by `branches`.
  void mask_branches(Branches branches) {
    const std::size_t dp = dims.projection_width();
    for (std::size_t k = 0; k < W_f.size(); ++k) {
      const bool p_slice = k < dp;
      if ((branches == Branches::HanOnly && p_slice) || (branches == Branches::HacnOnly && !p_slice))
        W_f[k] = Real(0);
    }
  }
};

template <ParamsOf<ModelParams> P, class F>
void visit_params(P& p, const std::string& prefix, F&& f) {
  visit_params(p.han, prefix + "han", f);
  visit_params(p.hacn, prefix + "hacn", f);
  f(prefix + "fusion.W_f", p.W_f);
  f(prefix + "fusion.b_f", p.b_f);
}

/// Named-parameter registry: every trainable tensor exactly once, in a fixed order.
inline ParamRefs param_refs(ModelParams& m) {
  ParamRefs out;
  visit_params(m, "", [&](const std::string& name, Tensor& t) { out.push_back({name, &t}); });
  return out;
}

inline ConstParamRefs param_refs(const ModelParams& m) {
  ConstParamRefs out;
  visit_params(m, "", [&](const std::string& name, const Tensor& t) { out.push_back({name, &t}); });
  return out;
}

inline std::size_t parameter_count(const ModelParams& m) {
  std::size_t n = 0;
  for (const auto& r : param_refs(m)) n += r.tensor->size();
  return n;
}

// ---------------------------------------------------------------------------
// Fusion, classifier, loss

/// [p ; s]
inline Vec fuse(std::span<const Real> p_vec, std::span<const Real> s) {
  Vec out(p_vec.begin(), p_vec.end());
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

inline double classify_logit(std::span<const Real> fused, const Tensor& W_f, const Tensor& b_f) {
  if (W_f.size() != fused.size()) {
    throw DimensionError("classify: fused width " + std::to_string(fused.size()) + " vs W_f " +
                         shape_string(W_f.shape()));
  }
  return static_cast<double>(b_f[0]) + static_cast<double>(dot(fused, W_f.data()));
}

/// sigmoid(b_f + fused . W_f)
inline double classify(std::span<const Real> fused, const Tensor& W_f, const Tensor& b_f) {
  return sigmoid(classify_logit(fused, W_f, b_f));
}

inline int predicted_label(double y_hat) { return y_hat >= 0.5 ? 1 : 0; }

inline constexpr double kProbClamp = 1e-12;

/// Binary cross-entropy with y_hat clamped to [1e-12, 1 - 1e-12].
inline double bce_loss(double y_hat, int y) {
  const double p = std::clamp(y_hat, kProbClamp, 1.0 - kProbClamp);
  return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

/// d bce / d logit; zero where the clamp is active.
inline double bce_grad_logit(double y_hat, int y) {
  if (y_hat < kProbClamp || y_hat > 1.0 - kProbClamp) return 0.0;
  return y_hat - y;
}

// ---------------------------------------------------------------------------
// Whole-user forward / backward

struct AttentionTrace {
  std::vector<Vec> word_weights;        // HAN alpha_nq per tweet
  std::vector<Vec> hacn_word_weights;   // HACN alpha_ijm per tweet (equal to HAN when shared)
  Vec han_tweet_weights;                // alpha_n
  std::vector<ClusterVector> clusters;  // members + alpha_ij
  Vec cluster_weights;                  // alpha_i
  std::vector<int> membership;          // cluster id per tweet
};

struct ForwardOptions {
  Mode mode = Mode::Eval;
  double dropout = 0.5;
  std::uint64_t seed = 0;  // dropout mask stream
  Branches branches = Branches::Joint;
};

struct ForwardCache {
  WordLevelOutput han_words;
  WordLevelOutput hacn_words;  // used only when word encoders are unshared
  LevelCache han_tweet;
  HacnCache hacn;
  HacnOutput hacn_out;
  Vec fused;        // after dropout
  Vec drop_scale;   // per fused coordinate: 0 or 1/keep (1 in eval)
};

struct ForwardResult {
  double y_hat = 0.5;
  double logit = 0.0;
  AttentionTrace trace;
  ForwardCache cache;
};

inline ForwardResult forward_user(const UserRecord& user, const ClusterAssignment& a, const ModelParams& m,
                                  const ForwardOptions& opt = {}, bool keep_cache = false) {
  if (user.tweets.empty()) throw PreconditionError("forward_user: user '" + user.user_id + "' has no tweets");
  if (opt.dropout < 0 || opt.dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
  const std::size_t dh = m.dims.d_h, dp = m.dims.projection_width();
  const bool use_han = opt.branches != Branches::HacnOnly;
  const bool use_hacn = opt.branches != Branches::HanOnly;
  ForwardResult r;
  auto& c = r.cache;

  c.han_words = encode_words(user, m.han.word, keep_cache);
  r.trace.word_weights = c.han_words.word_weights;
  Vec s(2 * dh, Real(0)), p_vec(dp, Real(0));
  if (use_han) {
    auto han = han_tweet_level(c.han_words.tweet_vectors, m.han.tweet, keep_cache ? &c.han_tweet : nullptr);
    s = std::move(han.s);
    r.trace.han_tweet_weights = std::move(han.trace.tweet_weights);
  }
  if (use_hacn) {
    const WordLevelOutput* words = &c.han_words;
    if (m.hacn.word) {
      c.hacn_words = encode_words(user, *m.hacn.word, keep_cache);
      words = &c.hacn_words;
    }
    c.hacn_out = hacn_from_tweet_vectors(words->tweet_vectors, a, m.hacn, keep_cache ? &c.hacn : nullptr);
    p_vec = c.hacn_out.p_vec;
    r.trace.hacn_word_weights = words->word_weights;
    r.trace.clusters = c.hacn_out.trace.clusters;
    r.trace.cluster_weights = c.hacn_out.trace.cluster_weights;
    r.trace.membership = c.hacn_out.trace.membership;
  }

  c.fused = fuse(p_vec, s);
  c.drop_scale.assign(c.fused.size(), Real(1));
  if (opt.mode == Mode::Train && opt.dropout > 0) {
    const double keep = 1.0 - opt.dropout;
    Rng rng(opt.seed);
    for (std::size_t k = 0; k < c.fused.size(); ++k) {
      c.drop_scale[k] = rng.uniform() < keep ? static_cast<Real>(1.0 / keep) : Real(0);
      c.fused[k] *= c.drop_scale[k];
    }
  }
  r.logit = classify_logit(c.fused, m.W_f, m.b_f);
  r.y_hat = sigmoid(r.logit);
  return r;
}

/// Accumulates d(loss)/d(params) into `g` given d(loss)/d(logit).
/// `r` must come from forward_user with keep_cache = true.
inline void backward_user(const ForwardResult& r, const ModelParams& m, double dlogit, ModelParams& g,
                          Branches branches = Branches::Joint) {
  const auto& c = r.cache;
  const std::size_t dh = m.dims.d_h, dp = m.dims.projection_width();
  const auto dl = static_cast<Real>(dlogit);
  axpy(dl, c.fused, g.W_f.data());
  g.b_f[0] += dl;
  Vec dfused(c.fused.size());
  for (std::size_t k = 0; k < dfused.size(); ++k) dfused[k] = dl * m.W_f[k] * c.drop_scale[k];

  const std::size_t n = c.han_words.tweet_vectors.size();
  std::vector<Vec> dhan_words(n, Vec(2 * dh, Real(0)));
  if (branches != Branches::HacnOnly) {
    auto dt = han_tweet_level_backward(c.han_tweet, m.han.tweet, std::span<const Real>(dfused).subspan(dp), g.han.tweet);
    for (std::size_t j = 0; j < n; ++j) axpy(Real(1), dt[j], dhan_words[j]);
  }
  if (branches != Branches::HanOnly) {
    if (m.hacn.word) {
      std::vector<Vec> dhacn_words(n, Vec(2 * dh, Real(0)));
      hacn_backward(c.hacn_out, c.hacn, m.hacn, std::span<const Real>(dfused).first(dp), g.hacn, dhacn_words);
      encode_words_backward(c.hacn_words, *m.hacn.word, dhacn_words, *g.hacn.word);
    } else {
      hacn_backward(c.hacn_out, c.hacn, m.hacn, std::span<const Real>(dfused).first(dp), g.hacn, dhan_words);
    }
  }
  encode_words_backward(c.han_words, m.han.word, dhan_words, g.han.word);
}

/// Probability of the depressed class for each user (eval mode).
inline std::vector<double> predict(const std::vector<UserRecord>& users, const std::vector<ClusterAssignment>& as,
                                   const ModelParams& m, Branches branches = Branches::Joint) {
  std::vector<double> out;
  out.reserve(users.size());
  ForwardOptions opt;
  opt.branches = branches;
  for (std::size_t i = 0; i < users.size(); ++i) out.push_back(forward_user(users[i], as.at(i), m, opt).y_hat);
  return out;
}

}  // namespace narrationdep
