#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "narrationdep/cluster/assignment.hpp"
#include "narrationdep/cluster/embed.hpp"
#include "narrationdep/core/error.hpp"

namespace narrationdep {

struct HdbscanParams {
  std::size_t min_cluster_size = 5;
  std::size_t min_samples = 5;
  Metric metric = Metric::Euclidean;

  bool operator==(const HdbscanParams&) const = default;

  void validate() const {
    if (min_cluster_size < 2) throw ConfigError("hdbscan: min_cluster_size must be at least 2");
    if (min_samples < 1) throw ConfigError("hdbscan: min_samples must be at least 1");
    if (min_samples > min_cluster_size)
      throw ConfigError("hdbscan: min_samples must not exceed min_cluster_size");
  }
};

struct MstEdge {
  std::size_t a;
  std::size_t b;
  double weight;
};

/// One row of the condensed tree: either a point leaving `parent` at
/// `lambda` (child_cluster == -1) or a child cluster born at `lambda`.
struct CondensedRow {
  int parent;
  int child_cluster;   // -1 for a point row
  std::size_t point;   // valid for point rows
  double lambda;
  std::size_t size;
};

struct HdbscanResult {
  std::vector<double> core_distances;
  std::vector<MstEdge> mst;                 // ascending by weight
  std::vector<CondensedRow> condensed;
  std::vector<double> cluster_birth;        // per condensed cluster id; 0 is the root
  std::vector<int> cluster_parent;          // -1 for the root
  std::vector<double> stability;            // per condensed cluster id
  std::vector<bool> selected;               // per condensed cluster id
  std::vector<int> raw_labels;              // -1 noise, else index into selected_clusters
  std::vector<int> selected_clusters;       // condensed ids in label order
  std::vector<double> selected_stability;   // indexed by raw label

  double mst_weight() const {
    std::vector<double> w;
    for (const auto& e : mst) w.push_back(e.weight);
    std::sort(w.begin(), w.end());
    double total = 0;
    for (double x : w) total += x;
    return total;
  }
};

namespace detail {

// Distances below this floor map to the same (finite) maximum lambda.
inline constexpr double kMinLambdaDistance = 1e-12;

inline double to_lambda(double distance) { return 1.0 / std::max(distance, kMinLambdaDistance); }

inline std::vector<double> pairwise(const PointSet& pts, Metric m) {
  const std::size_t n = pts.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = distance(pts[i], pts[j], m);
  return d;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
};

// Single-linkage hierarchy in which every group of equal-weight MST edges is
// one n-ary merge, so ties never depend on edge order.
struct LinkageNode {
  std::vector<std::size_t> children;  // node ids; empty for a leaf
  double distance = 0;
  std::size_t size = 1;
};

inline std::vector<LinkageNode> build_linkage(std::size_t n, const std::vector<MstEdge>& mst) {
  std::vector<LinkageNode> nodes(n);
  UnionFind uf(n);
  std::vector<std::size_t> node_of_root(n);
  std::iota(node_of_root.begin(), node_of_root.end(), 0);
  std::size_t i = 0;
  while (i < mst.size()) {
    std::size_t j = i;
    while (j < mst.size() && mst[j].weight == mst[i].weight) ++j;
    // Components touched by this weight level, before merging.
    std::vector<std::pair<std::size_t, std::size_t>> pre;  // (uf root, node id)
    for (std::size_t k = i; k < j; ++k) {
      for (std::size_t v : {mst[k].a, mst[k].b}) {
        const std::size_t r = uf.find(v);
        if (std::none_of(pre.begin(), pre.end(), [&](const auto& p) { return p.first == r; }))
          pre.emplace_back(r, node_of_root[r]);
      }
    }
    for (std::size_t k = i; k < j; ++k) {
      const std::size_t ra = uf.find(mst[k].a), rb = uf.find(mst[k].b);
      if (ra != rb) uf.parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    // Group the pre-merge components by their new root; each group is one node.
    std::vector<std::size_t> new_roots;
    for (const auto& [r, node] : pre) {
      const std::size_t nr = uf.find(r);
      if (std::find(new_roots.begin(), new_roots.end(), nr) == new_roots.end()) new_roots.push_back(nr);
    }
    for (std::size_t nr : new_roots) {
      LinkageNode node;
      node.distance = mst[i].weight;
      node.size = 0;
      for (const auto& [r, child] : pre) {
        if (uf.find(r) != nr) continue;
        node.children.push_back(child);
        node.size += nodes[child].size;
      }
      nodes.push_back(std::move(node));
      node_of_root[nr] = nodes.size() - 1;
    }
    i = j;
  }
  return nodes;
}

inline void collect_points(const std::vector<LinkageNode>& nodes, std::size_t id, std::vector<std::size_t>& out) {
  std::vector<std::size_t> stack{id};
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    if (nodes[cur].children.empty()) {
      out.push_back(cur);
    } else {
      for (std::size_t c : nodes[cur].children) stack.push_back(c);
    }
  }
}

}  // namespace detail

/// Core distances: distance to the min_samples-th nearest point, counting the
/// point itself as the first (so min_samples = 1 gives 0).
inline std::vector<double> core_distances(const std::vector<double>& dist, std::size_t n, std::size_t min_samples) {
  std::vector<double> core(n);
  const std::size_t k = std::min(min_samples, n) - 1;
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(dist.begin() + static_cast<std::ptrdiff_t>(i * n), dist.begin() + static_cast<std::ptrdiff_t>((i + 1) * n),
              row.begin());
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    core[i] = row[k];
  }
  return core;
}

/// Full HDBSCAN* run: core distances, mutual reachability, Kruskal MST,
/// single-linkage hierarchy, condensed tree at min_cluster_size and
/// excess-of-mass selection. The root is never selected, so a single dense
/// blob comes back as all noise.
inline HdbscanResult hdbscan_run(const PointSet& pts, const HdbscanParams& params) {
  params.validate();
  const std::size_t n = pts.size();
  HdbscanResult res;
  res.raw_labels.assign(n, kNoise);
  if (n == 0) return res;

  const auto dist = detail::pairwise(pts, params.metric);
  res.core_distances = core_distances(dist, n, params.min_samples);
  const auto& core = res.core_distances;

  std::vector<MstEdge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      edges.push_back({i, j, std::max({core[i], core[j], dist[i * n + j]})});
  std::sort(edges.begin(), edges.end(), [](const MstEdge& x, const MstEdge& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  detail::UnionFind uf(n);
  for (const auto& e : edges) {
    const std::size_t ra = uf.find(e.a), rb = uf.find(e.b);
    if (ra == rb) continue;
    uf.parent[std::max(ra, rb)] = std::min(ra, rb);
    res.mst.push_back(e);
    if (res.mst.size() + 1 == n) break;
  }

  if (n < params.min_cluster_size) return res;

  const auto nodes = detail::build_linkage(n, res.mst);
  const std::size_t mcs = params.min_cluster_size;

  // Condense top-down. Work items: (linkage node, condensed cluster id).
  res.cluster_birth.push_back(0.0);
  res.cluster_parent.push_back(-1);
  std::vector<std::pair<std::size_t, int>> work{{nodes.size() - 1, 0}};
  std::vector<std::size_t> pts_buf;
  auto drop_points = [&](std::size_t node, int cluster, double lambda) {
    pts_buf.clear();
    detail::collect_points(nodes, node, pts_buf);
    std::sort(pts_buf.begin(), pts_buf.end());
    for (std::size_t p : pts_buf) res.condensed.push_back({cluster, -1, p, lambda, 1});
  };
  while (!work.empty()) {
    auto [node_id, cluster] = work.back();
    work.pop_back();
    const auto& node = nodes[node_id];
    if (node.children.empty()) {
      // A lone point reached as a continuing cluster cannot happen for mcs >= 2.
      res.condensed.push_back({cluster, -1, node_id, detail::to_lambda(0.0), 1});
      continue;
    }
    const double lambda = detail::to_lambda(node.distance);
    std::vector<std::size_t> big;
    for (std::size_t c : node.children)
      if (nodes[c].size >= mcs) big.push_back(c);
    if (big.size() >= 2) {
      for (std::size_t c : node.children) {
        if (nodes[c].size < mcs) {
          drop_points(c, cluster, lambda);
          continue;
        }
        const int id = static_cast<int>(res.cluster_birth.size());
        res.cluster_birth.push_back(lambda);
        res.cluster_parent.push_back(cluster);
        res.condensed.push_back({cluster, id, 0, lambda, nodes[c].size});
        work.emplace_back(c, id);
      }
    } else {
      for (std::size_t c : node.children) {
        if (big.size() == 1 && c == big[0]) {
          work.emplace_back(c, cluster);
        } else {
          drop_points(c, cluster, lambda);
        }
      }
    }
  }

  const std::size_t n_clusters = res.cluster_birth.size();
  res.stability.assign(n_clusters, 0.0);
  for (const auto& row : res.condensed) {
    const auto p = static_cast<std::size_t>(row.parent);
    res.stability[p] += (row.lambda - res.cluster_birth[p]) * static_cast<double>(row.size);
  }

  // Excess of mass; children always carry larger ids than their parent.
  std::vector<std::vector<int>> children(n_clusters);
  for (std::size_t c = 1; c < n_clusters; ++c)
    children[static_cast<std::size_t>(res.cluster_parent[c])].push_back(static_cast<int>(c));
  res.selected.assign(n_clusters, false);
  std::vector<double> best(n_clusters, 0.0);
  for (std::size_t c = n_clusters; c-- > 1;) {
    double subtree = 0;
    for (int ch : children[c]) subtree += best[static_cast<std::size_t>(ch)];
    if (children[c].empty() || res.stability[c] >= subtree) {
      best[c] = res.stability[c];
      res.selected[c] = true;
      std::vector<int> stack(children[c].begin(), children[c].end());
      while (!stack.empty()) {
        const auto d = static_cast<std::size_t>(stack.back());
        stack.pop_back();
        res.selected[d] = false;
        stack.insert(stack.end(), children[d].begin(), children[d].end());
      }
    } else {
      best[c] = subtree;
    }
  }

  std::vector<int> label_of_cluster(n_clusters, kNoise);
  for (std::size_t c = 1; c < n_clusters; ++c) {
    if (!res.selected[c]) continue;
    label_of_cluster[c] = static_cast<int>(res.selected_clusters.size());
    res.selected_clusters.push_back(static_cast<int>(c));
    res.selected_stability.push_back(res.stability[c]);
  }
  for (const auto& row : res.condensed) {
    if (row.child_cluster != -1) continue;
    int c = row.parent;
    while (c > 0 && !res.selected[static_cast<std::size_t>(c)]) c = res.cluster_parent[static_cast<std::size_t>(c)];
    res.raw_labels[row.point] = c > 0 ? label_of_cluster[static_cast<std::size_t>(c)] : kNoise;
  }
  return res;
}

/// HDBSCAN followed by residual routing: noise becomes one shared cluster and
/// the cluster count is capped at e_max. Fewer points than min_cluster_size
/// yields a single cluster holding everything.
inline ClusterAssignment hdbscan_fit(const PointSet& pts, const HdbscanParams& params,
                                     std::size_t e_max = kDefaultEMax) {
  params.validate();
  if (pts.size() < params.min_cluster_size) return single_cluster(pts.size());
  const auto res = hdbscan_run(pts, params);
  return route_residual(res.raw_labels, res.selected_stability, e_max);
}

}  // namespace narrationdep
