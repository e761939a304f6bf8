#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "narrationdep/cluster/assignment.hpp"
#include "narrationdep/data/dataset.hpp"
#include "narrationdep/model/encoder.hpp"
#include "narrationdep/model/han.hpp"

namespace narrationdep {

struct HacnParams {
  std::optional<LevelParams> word;  // present only when not shared with HAN
  LevelParams tweet;                // within-cluster tweet encoder (W_t, b_t, u_t)
  LevelParams cluster;              // cluster-sequence encoder (W_s, b_s, u_s)
  Tensor W_proj;                    // [d_p x 2 d_h]
  Tensor b_proj;                    // [d_p]
};

template <ParamsOf<HacnParams> P, class F>
void visit_params(P& p, const std::string& prefix, F&& f) {
  if (p.word) visit_params(*p.word, prefix + ".word", f);
  visit_params(p.tweet, prefix + ".tweet", f);
  visit_params(p.cluster, prefix + ".cluster", f);
  f(prefix + ".proj.W", p.W_proj);
  f(prefix + ".proj.b", p.b_proj);
}

struct ClusterVector {
  int id = 0;
  std::vector<std::size_t> members;  // tweet indices, chronological
  Vec vector;                        // c_i, width 2 d_h
  Vec tweet_weights;                 // alpha_ij over members
};

/// Within-cluster level: BiGRU + attention over the member tweets' vectors.
inline ClusterVector encode_cluster(const std::vector<Vec>& member_vectors, const LevelParams& tweet,
                                    LevelCache* cache = nullptr) {
  if (member_vectors.empty()) throw PreconditionError("encode_cluster: empty cluster");
  auto r = encode_level(stack_rows(member_vectors), tweet, cache);
  ClusterVector cv;
  cv.vector = std::move(r.context);
  cv.tweet_weights = std::move(r.weights);
  return cv;
}

/// Word level then within-cluster level for a cluster given as raw tweets.
inline ClusterVector encode_cluster(const std::vector<TweetRecord>& tweets, const LevelParams& word,
                                    const LevelParams& tweet) {
  if (tweets.empty()) throw PreconditionError("encode_cluster: empty cluster");
  std::vector<Vec> vecs;
  for (const auto& t : tweets) vecs.push_back(encode_level(t.tokens, word).context);
  auto cv = encode_cluster(vecs, tweet);
  for (std::size_t j = 0; j < tweets.size(); ++j) cv.members.push_back(j);
  return cv;
}

struct ClusterSequenceOutput {
  Vec summary;          // s-bar, width 2 d_h
  Vec cluster_weights;  // alpha_i
};

inline ClusterSequenceOutput encode_cluster_sequence(const std::vector<ClusterVector>& clusters,
                                                     const LevelParams& cluster_level,
                                                     LevelCache* cache = nullptr) {
  if (clusters.empty()) throw PreconditionError("encode_cluster_sequence: no clusters");
  std::vector<Vec> rows;
  rows.reserve(clusters.size());
  for (const auto& c : clusters) rows.push_back(c.vector);
  auto r = encode_level(stack_rows(rows), cluster_level, cache);
  return {std::move(r.context), std::move(r.weights)};
}

/// p = tanh(W_proj s-bar + b_proj).
inline Vec behavioural_projection(std::span<const Real> summary, const HacnParams& p) {
  if (p.W_proj.cols() != summary.size()) {
    throw DimensionError("behavioural_projection: summary width " + std::to_string(summary.size()) +
                         " vs projection " + shape_string(p.W_proj.shape()));
  }
  Vec out(p.b_proj.values());
  matvec_acc(p.W_proj.data(), p.W_proj.rows(), p.W_proj.cols(), summary, out);
  for (auto& v : out) v = std::tanh(v);
  return out;
}

struct HacnTrace {
  std::vector<Vec> word_weights;        // alpha_ijm per tweet (by tweet index)
  std::vector<ClusterVector> clusters;  // ordered by cluster id
  Vec cluster_weights;                  // alpha_i
  std::vector<int> membership;          // cluster id per tweet
};

struct HacnOutput {
  Vec p_vec;
  Vec summary;
  HacnTrace trace;
};

struct HacnCache {
  std::vector<LevelCache> tweet;  // per cluster
  LevelCache cluster;
};

/// Cluster-level part of HACN, given precomputed per-tweet vectors.
/// Clusters are presented in ascending id order (ids follow earliest tweet).
inline HacnOutput hacn_from_tweet_vectors(const std::vector<Vec>& tweet_vectors, const ClusterAssignment& a,
                                          const HacnParams& p, HacnCache* cache = nullptr) {
  validate_assignment(a, tweet_vectors.size());
  HacnOutput out;
  const auto members = a.members();
  if (cache) cache->tweet.resize(a.E);
  for (std::size_t c = 0; c < a.E; ++c) {
    std::vector<Vec> vecs;
    vecs.reserve(members[c].size());
    for (std::size_t t : members[c]) vecs.push_back(tweet_vectors[t]);
    auto cv = encode_cluster(vecs, p.tweet, cache ? &cache->tweet[c] : nullptr);
    cv.id = static_cast<int>(c);
    cv.members = members[c];
    out.trace.clusters.push_back(std::move(cv));
  }
  auto seq = encode_cluster_sequence(out.trace.clusters, p.cluster, cache ? &cache->cluster : nullptr);
  out.summary = std::move(seq.summary);
  out.trace.cluster_weights = std::move(seq.cluster_weights);
  out.trace.membership = a.labels;
  out.p_vec = behavioural_projection(out.summary, p);
  return out;
}

/// Backward of hacn_from_tweet_vectors given d(p_vec); accumulates into
/// dtweet_vectors (indexed by tweet).
inline void hacn_backward(const HacnOutput& fwd, const HacnCache& cache, const HacnParams& p,
                          std::span<const Real> dp_vec, HacnParams& g, std::vector<Vec>& dtweet_vectors) {
  const std::size_t dp = p.W_proj.rows(), dsum = p.W_proj.cols();
  Vec dpre(dp);
  for (std::size_t k = 0; k < dp; ++k) dpre[k] = dp_vec[k] * (Real(1) - fwd.p_vec[k] * fwd.p_vec[k]);
  outer_acc(dpre, fwd.summary, g.W_proj.data());
  axpy(Real(1), dpre, g.b_proj.data());
  Vec dsummary(dsum, Real(0));
  matvec_t_acc(p.W_proj.data(), dp, dsum, dpre, dsummary);

  const Tensor dclusters = encode_level_backward(cache.cluster, p.cluster, dsummary, g.cluster);
  for (std::size_t c = 0; c < fwd.trace.clusters.size(); ++c) {
    const Tensor dx = encode_level_backward(cache.tweet[c], p.tweet, dclusters.row(c), g.tweet);
    const auto& mem = fwd.trace.clusters[c].members;
    for (std::size_t j = 0; j < mem.size(); ++j) axpy(Real(1), dx.row(j), dtweet_vectors[mem[j]]);
  }
}

/// Full HACN branch: word level (with `word`), clusters, cluster sequence,
/// behavioural projection.
inline HacnOutput hacn_encode(const UserRecord& user, const ClusterAssignment& a, const HacnParams& p,
                              const LevelParams& word) {
  validate_assignment(a, user.tweets.size());
  auto words = encode_words(user, word);
  auto out = hacn_from_tweet_vectors(words.tweet_vectors, a, p);
  out.trace.word_weights = std::move(words.word_weights);
  return out;
}

}  // namespace narrationdep
