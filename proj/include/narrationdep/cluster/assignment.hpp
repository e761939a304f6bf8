#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "narrationdep/core/error.hpp"

namespace narrationdep {

inline constexpr int kNoise = -1;
inline constexpr std::size_t kDefaultEMax = 30;

/// Tweet-to-cluster map for one user. After routing every label is in
/// [0, E) and cluster ids follow the order of each cluster's earliest tweet.
struct ClusterAssignment {
  std::vector<int> labels;
  std::size_t E = 0;

  bool operator==(const ClusterAssignment&) const = default;

  /// Tweet indices of each cluster, ascending.
  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(E);
    for (std::size_t i = 0; i < labels.size(); ++i) out.at(static_cast<std::size_t>(labels[i])).push_back(i);
    return out;
  }
};

/// Renumbers non-noise labels by first occurrence. Since tweets are stored in
/// chronological order, first occurrence is the earliest-tweet key.
inline std::vector<int> canonicalize_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size(), kNoise);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) continue;
    auto [it, inserted] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

/// Turns a raw clustering (noise = -1) into a total assignment with at most
/// e_max clusters. If there are too many clusters, the lowest-stability ones
/// are dissolved into the noise pool first; the noise pool then becomes one
/// shared residual cluster. `stability[c]` belongs to raw label c.
inline ClusterAssignment route_residual(const std::vector<int>& raw, const std::vector<double>& stability,
                                        std::size_t e_max = kDefaultEMax) {
  if (e_max < 1) throw ConfigError("route_residual: e_max must be at least 1");
  std::vector<int> labels = raw;
  std::vector<int> ids;
  for (int l : labels)
    if (l != kNoise && std::find(ids.begin(), ids.end(), l) == ids.end()) ids.push_back(l);
  bool has_noise = std::find(labels.begin(), labels.end(), kNoise) != labels.end();

  if (ids.size() + (has_noise ? 1 : 0) > e_max) {
    auto stab = [&](int c) {
      return static_cast<std::size_t>(c) < stability.size() ? stability[static_cast<std::size_t>(c)] : 0.0;
    };
    // Lowest stability first; among equals, dissolve the higher raw id first.
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
      if (stab(a) != stab(b)) return stab(a) < stab(b);
      return a > b;
    });
    const std::size_t keep = e_max - 1;
    const std::size_t drop = ids.size() - keep;
    for (std::size_t k = 0; k < drop; ++k)
      for (auto& l : labels)
        if (l == ids[k]) l = kNoise;
    has_noise = true;
  }
  if (has_noise) {
    const int residual = std::numeric_limits<int>::max();
    for (auto& l : labels)
      if (l == kNoise) l = residual;
  }
  ClusterAssignment a;
  a.labels = canonicalize_labels(labels);
  a.E = a.labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(a.labels.begin(), a.labels.end()) + 1);
  return a;
}

inline ClusterAssignment single_cluster(std::size_t n) {
  ClusterAssignment a;
  a.labels.assign(n, 0);
  a.E = n == 0 ? 0 : 1;
  return a;
}

/// Throws ConsistencyError unless `a` is a total assignment over n tweets.
inline void validate_assignment(const ClusterAssignment& a, std::size_t n) {
  if (a.labels.size() != n) {
    throw ConsistencyError("cluster assignment covers " + std::to_string(a.labels.size()) +
                           " tweets, user has " + std::to_string(n));
  }
  std::vector<bool> used(a.E, false);
  for (int l : a.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= a.E)
      throw ConsistencyError("cluster label " + std::to_string(l) + " outside [0, " + std::to_string(a.E) + ")");
    used[static_cast<std::size_t>(l)] = true;
  }
  for (std::size_t c = 0; c < a.E; ++c)
    if (!used[c]) throw ConsistencyError("cluster " + std::to_string(c) + " is empty");
}

}  // namespace narrationdep
