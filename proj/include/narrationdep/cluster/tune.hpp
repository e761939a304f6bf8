#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "narrationdep/cluster/clustering.hpp"
#include "narrationdep/core/rng.hpp"
#include "narrationdep/model/train.hpp"

namespace narrationdep {

struct SearchSpace {
  std::size_t min_cluster_size_lo = 2;
  std::size_t min_cluster_size_hi = 15;
  std::vector<Metric> metrics{Metric::Euclidean, Metric::Cosine};
  int k_lo = 2;  // k-means
  int k_hi = 10;
};

struct TuneTrial {
  ClusteringConfig config;
  double score = 0;
};

struct TuneResult {
  ClusteringConfig best;
  double best_score = -1;
  std::vector<TuneTrial> trials;
};

/// Draws one candidate configuration of the same kind as `base`.
inline ClusteringConfig sample_config(const ClusteringConfig& base, const SearchSpace& space, Rng& rng) {
  ClusteringConfig c = base;
  if (base.kind == Clusterer::Hdbscan) {
    const auto mcs = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(space.min_cluster_size_lo),
                                                              static_cast<std::int64_t>(space.min_cluster_size_hi)));
    c.hdbscan.min_cluster_size = mcs;
    c.hdbscan.min_samples = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(mcs)));
    c.hdbscan.metric = space.metrics.at(static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(space.metrics.size()) - 1)));
  } else {
    c.k = static_cast<int>(rng.uniform_int(space.k_lo, space.k_hi));
  }
  return c;
}

/// Size key used to break score ties: smaller min_cluster_size (or k) first.
inline std::size_t tie_key(const ClusteringConfig& c) {
  return c.kind == Clusterer::Hdbscan ? c.hdbscan.min_cluster_size : static_cast<std::size_t>(c.k);
}

/// Seeded random search maximising `objective`. Equal scores go to the
/// smaller tie_key, then to the earlier trial.
inline TuneResult random_search(const ClusteringConfig& base, const SearchSpace& space, std::size_t budget,
                                std::uint64_t seed, const std::function<double(const ClusteringConfig&)>& objective) {
  if (budget < 1) throw ConfigError("tune: search budget must be at least 1");
  Rng rng(derive_seed(seed, "tune"));
  TuneResult res;
  for (std::size_t t = 0; t < budget; ++t) {
    TuneTrial trial{sample_config(base, space, rng), 0};
    trial.score = objective(trial.config);
    const bool better = res.trials.empty() || trial.score > res.best_score ||
                        (trial.score == res.best_score && tie_key(trial.config) < tie_key(res.best));
    if (better) {
      res.best = trial.config;
      res.best_score = trial.score;
    }
    res.trials.push_back(trial);
  }
  return res;
}

struct TuneOptions {
  std::size_t budget = 8;
  std::size_t epochs = 5;  // length of each short training run
  SearchSpace space;
};

/// Picks clustering parameters by validation F1 of a short training run.
/// Only `train_users` and `validation_users` are touched.
inline TuneResult tune_clustering(const std::vector<UserRecord>& train_users,
                                  const std::vector<UserRecord>& validation_users, const ClusteringConfig& base,
                                  const TrainConfig& train_cfg, std::size_t d_w, const TuneOptions& opt,
                                  std::uint64_t seed) {
  if (validation_users.empty()) throw ConfigError("tune_clustering: empty validation set");
  if (train_users.empty()) throw ConfigError("tune_clustering: empty training set");
  TrainConfig short_cfg = train_cfg;
  short_cfg.epochs = opt.epochs;
  short_cfg.early_stopping_patience = 0;
  return random_search(base, opt.space, opt.budget, seed, [&](const ClusteringConfig& c) {
    const auto train_as = cluster_users(train_users, c, seed);
    const auto val_as = cluster_users(validation_users, c, seed);
    const auto model = train(train_users, train_as, short_cfg, d_w).params;
    return f1_on({&validation_users, &val_as}, model, short_cfg.branches);
  });
}

}  // namespace narrationdep
