#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "narrationdep/cluster/tune.hpp"
#include "narrationdep/data/preprocess.hpp"
#include "narrationdep/eval/metrics.hpp"
#include "narrationdep/model/train.hpp"

namespace narrationdep {

struct CvConfig {
  TrainConfig train;
  ClusteringConfig clustering;
  bool tune = true;
  TuneOptions tuning;
  double validation_share = 0.2;  // of each fold's training split, used only for tuning
  std::size_t folds = 5;
  std::size_t min_tweets = 10;
  std::uint64_t seed = 0;
};

struct FoldReport {
  std::size_t fold = 0;
  Metrics metrics;
  ClusteringConfig clustering;
  std::vector<std::string> test_ids;
  std::vector<double> epoch_loss;
};

struct Summary {
  double mean = 0;
  double stddev = 0;  // sample standard deviation (n - 1); 0 for one fold
  double min = 0;
  double max = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct CvReport {
  std::vector<FoldReport> folds;
  Summary precision, recall, f1, accuracy;
};

namespace detail {

// Seeded holdout of the training ids for tuning; ids arrive sorted.
inline void split_holdout(std::vector<std::string> ids, double share, std::uint64_t seed,
                          std::vector<std::string>& fit, std::vector<std::string>& val) {
  Rng rng(seed);
  rng.shuffle(ids);
  auto n_val = static_cast<std::size_t>(std::lround(share * static_cast<double>(ids.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
  val.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  fit.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());
}

}  // namespace detail

/// k-fold evaluation. Per fold: clustering parameters are tuned on a holdout
/// carved from the training split (never the test split), the model is
/// trained on the full training split and scored on the test split.
inline CvReport cross_validate(const Dataset& d, const CvConfig& cfg) {
  cfg.train.validate();
  cfg.clustering.validate();
  for (const auto& u : d.users) {
    if (u.tweets.size() < cfg.min_tweets) {
      throw PreconditionError("cross_validate: user '" + u.user_id + "' has " + std::to_string(u.tweets.size()) +
                              " tweets; apply filter_min_tweets first");
    }
  }
  CvReport report;
  const auto folds = kfold_split(d, cfg.folds, derive_seed(cfg.seed, "folds"));
  std::vector<double> ps, rs, fs, as;
  for (const auto& split : folds) {
    FoldReport fr;
    fr.fold = split.fold;
    fr.test_ids = split.test_ids;
    const auto train_users = select_users(d, split.train_ids);
    const auto test_users = select_users(d, split.test_ids);

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train", split.fold);
    fr.clustering = cfg.clustering;
    if (cfg.tune && train_users.size() >= 2) {
      std::vector<std::string> fit_ids, val_ids;
      detail::split_holdout(split.train_ids, cfg.validation_share, derive_seed(cfg.seed, "holdout", split.fold),
                            fit_ids, val_ids);
      fr.clustering = tune_clustering(select_users(d, fit_ids), select_users(d, val_ids), cfg.clustering, tc, d.d_w,
                                      cfg.tuning, derive_seed(cfg.seed, "tune", split.fold))
                          .best;
    }
    const auto cseed = derive_seed(cfg.seed, "cluster", split.fold);
    const auto train_as = cluster_users(train_users, fr.clustering, cseed);
    const auto test_as = cluster_users(test_users, fr.clustering, cseed);
    auto trained = train(train_users, train_as, tc, d.d_w);
    fr.epoch_loss = std::move(trained.epoch_loss);

    std::vector<int> labels;
    for (const auto& u : test_users) labels.push_back(to_int(u.label));
    fr.metrics = prf1_accuracy(confusion(threshold(predict(test_users, test_as, trained.params, tc.branches)), labels));
    ps.push_back(fr.metrics.precision);
    rs.push_back(fr.metrics.recall);
    fs.push_back(fr.metrics.f1);
    as.push_back(fr.metrics.accuracy);
    report.folds.push_back(std::move(fr));
  }
  report.precision = summarize(ps);
  report.recall = summarize(rs);
  report.f1 = summarize(fs);
  report.accuracy = summarize(as);
  return report;
}

}  // namespace narrationdep
