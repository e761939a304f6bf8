#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "narrationdep/cluster/hdbscan.hpp"
#include "narrationdep/cluster/kmeans.hpp"
#include "narrationdep/data/dataset.hpp"

namespace narrationdep {

enum class Clusterer { Hdbscan, KMeans };

inline std::string to_string(Clusterer c) { return c == Clusterer::Hdbscan ? "hdbscan" : "kmeans"; }

inline Clusterer clusterer_from_string(const std::string& s) {
  if (s == "hdbscan") return Clusterer::Hdbscan;
  if (s == "kmeans") return Clusterer::KMeans;
  throw ConfigError("unknown clusterer '" + s + "'");
}

struct ClusteringConfig {
  Clusterer kind = Clusterer::Hdbscan;
  HdbscanParams hdbscan;
  int k = 4;  // k-means only; clamped to the user's tweet count
  std::size_t e_max = kDefaultEMax;

  bool operator==(const ClusteringConfig&) const = default;

  void validate() const {
    if (kind == Clusterer::Hdbscan) hdbscan.validate();
    if (kind == Clusterer::KMeans && k < 1) throw ConfigError("kmeans: k must be positive");
    if (e_max < 1) throw ConfigError("e_max must be at least 1");
  }
};

inline nlohmann::json to_json(const ClusteringConfig& c) {
  nlohmann::json j = {{"clusterer", to_string(c.kind)}, {"e_max", c.e_max}};
  if (c.kind == Clusterer::Hdbscan) {
    j["min_cluster_size"] = c.hdbscan.min_cluster_size;
    j["min_samples"] = c.hdbscan.min_samples;
    j["metric"] = to_string(c.hdbscan.metric);
  } else {
    j["k"] = c.k;
  }
  return j;
}

inline ClusteringConfig clustering_from_json(const nlohmann::json& j) {
  ClusteringConfig c;
  c.kind = clusterer_from_string(j.value("clusterer", std::string("hdbscan")));
  c.e_max = j.value("e_max", kDefaultEMax);
  c.hdbscan.min_cluster_size = j.value("min_cluster_size", c.hdbscan.min_cluster_size);
  c.hdbscan.min_samples = j.value("min_samples", c.hdbscan.min_samples);
  c.hdbscan.metric = metric_from_string(j.value("metric", std::string("euclidean")));
  c.k = j.value("k", c.k);
  c.validate();
  return c;
}

/// Clusters one user's tweets. k-means draws its restarts from a stream keyed
/// by the user id, so a user's assignment does not depend on its position.
inline ClusterAssignment cluster_user(const UserRecord& u, const ClusteringConfig& cfg, std::uint64_t seed = 0) {
  const auto pts = sentence_embed(u);
  if (cfg.kind == Clusterer::Hdbscan) return hdbscan_fit(pts, cfg.hdbscan, cfg.e_max);
  const int k = std::min({cfg.k, static_cast<int>(pts.size()), static_cast<int>(cfg.e_max)});
  return kmeans_fit(pts, k, 20, derive_seed(seed, "kmeans:" + u.user_id)).assignment;
}

/// Worker count: NARRATIONDEP_THREADS if set and positive, else the hardware
/// concurrency (at least 1).
inline std::size_t worker_count() {
  if (const char* env = std::getenv("NARRATIONDEP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on a small pool. Each index is handled exactly
/// once; the first exception is rethrown after all workers stop.
template <class F>
void parallel_for(std::size_t n, F&& fn, std::size_t workers = worker_count()) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Per-user clustering; output order follows `users` whatever the pool size.
inline std::vector<ClusterAssignment> cluster_users(const std::vector<UserRecord>& users, const ClusteringConfig& cfg,
                                                    std::uint64_t seed = 0) {
  cfg.validate();
  std::vector<ClusterAssignment> out(users.size());
  parallel_for(users.size(), [&](std::size_t i) { out[i] = cluster_user(users[i], cfg, seed); });
  return out;
}

}  // namespace narrationdep
