#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "narrationdep/cluster/assignment.hpp"
#include "narrationdep/cluster/embed.hpp"
#include "narrationdep/core/error.hpp"
#include "narrationdep/core/rng.hpp"

namespace narrationdep {

struct KMeansResult {
  ClusterAssignment assignment;
  std::vector<int> raw_labels;  // label per point before canonical renumbering
  PointSet centroids;           // indexed by raw label
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after every assignment step of the best restart
};

namespace detail {

inline double sq_dist(const Vec& a, const Vec& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

inline PointSet kmeanspp_seed(const PointSet& pts, std::size_t k, Rng& rng) {
  const std::size_t n = pts.size();
  PointSet centers;
  centers.push_back(pts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(pts[i], centers[0]);
  while (centers.size() < k) {
    double total = 0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total <= 0) {
      pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    } else {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(pts[i], centers.back()));
  }
  return centers;
}

struct LloydRun {
  std::vector<int> labels;
  PointSet centroids;
  double inertia = 0;
  std::vector<double> history;
};

inline LloydRun lloyd(const PointSet& pts, PointSet centroids, std::size_t max_iter) {
  const std::size_t n = pts.size(), k = centroids.size(), d = pts[0].size();
  LloydRun run;
  run.labels.assign(n, -1);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = sq_dist(pts[i], centroids[c]);
        if (dd < best_d) {
          best_d = dd;
          best = static_cast<int>(c);
        }
      }
      if (run.labels[i] != best) changed = true;
      run.labels[i] = best;
      inertia += best_d;
    }
    if (!run.history.empty() && inertia > run.history.back() * (1 + 1e-12) + 1e-300) {
      throw NumericalError("kmeans: inertia increased from " + std::to_string(run.history.back()) +
                           " to " + std::to_string(inertia) + " at iteration " + std::to_string(iter));
    }
    run.history.push_back(inertia);
    run.inertia = inertia;
    if (!changed && iter > 0) break;

    std::vector<Vec> sums(k, Vec(d, Real(0)));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(run.labels[i]);
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) sums[c][j] += pts[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) centroids[c][j] = sums[c][j] / static_cast<Real>(counts[c]);
    }
    // Empty clusters move to the point farthest from its own centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        const double dd = sq_dist(pts[i], centroids[static_cast<std::size_t>(run.labels[i])]);
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      centroids[c] = pts[far];
    }
  }
  run.centroids = std::move(centroids);
  return run;
}

// Single-point transfers that lower inertia (Hartigan's criterion), applied
// after Lloyd converges. Lloyd fixed points can still admit such moves.
inline void hartigan_polish(const PointSet& pts, LloydRun& run, std::size_t max_pass) {
  const std::size_t n = pts.size(), k = run.centroids.size(), d = pts[0].size();
  std::vector<std::size_t> counts(k, 0);
  auto recenter = [&] {
    std::vector<Vec> sums(k, Vec(d, Real(0)));
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(run.labels[i]);
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) sums[c][j] += pts[i][j];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] != 0)
        for (std::size_t j = 0; j < d; ++j) run.centroids[c][j] = sums[c][j] / static_cast<Real>(counts[c]);
  };
  recenter();
  for (std::size_t pass = 0; pass < max_pass; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = static_cast<std::size_t>(run.labels[i]);
      if (counts[a] <= 1) continue;
      const double na = static_cast<double>(counts[a]);
      const double cost_out = na / (na - 1) * sq_dist(pts[i], run.centroids[a]);
      std::size_t to = a;
      double best_in = cost_out;
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        if (counts[b] == 0) continue;
        const double nb = static_cast<double>(counts[b]);
        const double cost_in = nb / (nb + 1) * sq_dist(pts[i], run.centroids[b]);
        if (cost_in < best_in * (1 - 1e-12)) {
          best_in = cost_in;
          to = b;
        }
      }
      if (to == a) continue;
      const double nb = static_cast<double>(counts[to]);
      for (std::size_t j = 0; j < d; ++j) {
        const double x = pts[i][j];
        run.centroids[a][j] = static_cast<Real>((run.centroids[a][j] * na - x) / (na - 1));
        run.centroids[to][j] = static_cast<Real>((run.centroids[to][j] * nb + x) / (nb + 1));
      }
      --counts[a];
      ++counts[to];
      run.labels[i] = static_cast<int>(to);
      moved = true;
    }
    if (!moved) break;
  }
  // Recompute exactly rather than trusting the incremental updates.
  recenter();
  double inertia = 0;
  for (std::size_t i = 0; i < n; ++i) inertia += sq_dist(pts[i], run.centroids[static_cast<std::size_t>(run.labels[i])]);
  if (inertia > run.inertia * (1 + 1e-12) + 1e-300) {
    throw NumericalError("kmeans: refinement increased inertia from " + std::to_string(run.inertia) + " to " +
                         std::to_string(inertia));
  }
  run.inertia = inertia;
  run.history.push_back(inertia);
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding and a Hartigan transfer pass,
/// best of `restarts` by inertia
/// (earliest restart wins ties). Deterministic for a given seed.
inline KMeansResult kmeans_fit(const PointSet& pts, int k, int restarts = 20, std::uint64_t seed = 0,
                               std::size_t max_iter = 300) {
  if (k <= 0) throw ConfigError("kmeans_fit: k must be positive, got " + std::to_string(k));
  if (restarts <= 0) throw ConfigError("kmeans_fit: restarts must be positive");
  if (pts.size() < static_cast<std::size_t>(k)) {
    throw PreconditionError("kmeans_fit: " + std::to_string(pts.size()) + " points for k=" + std::to_string(k));
  }
  detail::LloydRun best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, "kmeans", static_cast<std::uint64_t>(r)));
    auto run = detail::lloyd(pts, detail::kmeanspp_seed(pts, static_cast<std::size_t>(k), rng), max_iter);
    detail::hartigan_polish(pts, run, max_iter);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  KMeansResult res;
  res.raw_labels = best.labels;
  res.centroids = std::move(best.centroids);
  res.inertia = best.inertia;
  res.inertia_history = std::move(best.history);
  res.assignment = route_residual(res.raw_labels, {}, static_cast<std::size_t>(k));
  return res;
}

}  // namespace narrationdep
