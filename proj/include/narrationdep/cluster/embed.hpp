#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "narrationdep/core/error.hpp"
#include "narrationdep/data/dataset.hpp"

namespace narrationdep {

using PointSet = std::vector<Vec>;

enum class Metric { Euclidean, Cosine };

inline std::string to_string(Metric m) { return m == Metric::Euclidean ? "euclidean" : "cosine"; }

inline Metric metric_from_string(const std::string& s) {
  if (s == "euclidean") return Metric::Euclidean;
  if (s == "cosine") return Metric::Cosine;
  throw ConfigError("unknown distance metric '" + s + "'");
}

inline double euclidean_distance(const Vec& a, const Vec& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// 1 - cos(a, b), clamped to [0, 2]. A zero vector is at distance 1 from everything.
inline double cosine_distance(const Vec& a, const Vec& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0 || bb == 0) return 1.0;
  return std::clamp(1.0 - ab / std::sqrt(aa * bb), 0.0, 2.0);
}

inline double distance(const Vec& a, const Vec& b, Metric m) {
  return m == Metric::Euclidean ? euclidean_distance(a, b) : cosine_distance(a, b);
}

/// Mean of the tweet's token vectors; the in-core stand-in for a sentence
/// embedding. A tweet carrying a single precomputed sentence vector maps to
/// that vector unchanged.
inline Vec sentence_embed(const TweetRecord& t) {
  if (t.token_count() == 0) throw PreconditionError("sentence_embed: tweet has no tokens");
  Vec out(t.dim(), Real(0));
  for (std::size_t q = 0; q < t.token_count(); ++q) {
    auto row = t.tokens.row(q);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += row[k];
  }
  const auto n = static_cast<Real>(t.token_count());
  for (auto& x : out) x /= n;
  return out;
}

inline PointSet sentence_embed(const UserRecord& u) {
  if (u.tweets.empty()) throw PreconditionError("sentence_embed: user '" + u.user_id + "' has no tweets");
  PointSet out;
  out.reserve(u.tweets.size());
  for (const auto& t : u.tweets) out.push_back(sentence_embed(t));
  return out;
}

}  // namespace narrationdep
