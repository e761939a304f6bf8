#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <set>

#include "narrationdep/cluster/tune.hpp"
#include "narrationdep/data/synth.hpp"
#include "narrationdep/eval/cross_validate.hpp"
#include "test_support.hpp"

using namespace narrationdep;

namespace {

ClusteringConfig hdbscan_base() {
  ClusteringConfig c;
  c.hdbscan = {4, 2, Metric::Euclidean};
  return c;
}

std::vector<UserRecord> themed_users(std::size_t n, std::uint64_t seed) {
  SynthOptions o;
  o.n_users = n;
  o.seed = seed;
  return synth_generate(o).users;
}

}  // namespace

TEST_CASE("random_search with budget 1 returns the sampled config", "[tune]") {
  const auto base = hdbscan_base();
  SearchSpace space;
  Rng rng(derive_seed(7, "tune"));
  const auto expected = sample_config(base, space, rng);
  const auto r = random_search(base, space, 1, 7, [](const ClusteringConfig&) { return 0.25; });
  CHECK(r.best == expected);
  CHECK(r.best_score == 0.25);
  REQUIRE(r.trials.size() == 1);
  CHECK_THROWS_AS(random_search(base, space, 0, 7, [](const ClusteringConfig&) { return 0.0; }), ConfigError);
}

TEST_CASE("random_search returns the argmax of the objective", "[tune]") {
  SearchSpace space;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    // Peaked at min_cluster_size 9 with a metric bonus; any trial set has a unique best score.
    auto objective = [](const ClusteringConfig& c) {
      const double m = static_cast<double>(c.hdbscan.min_cluster_size);
      return -(m - 9) * (m - 9) + (c.hdbscan.metric == Metric::Cosine ? 0.5 : 0.0) +
             0.01 * static_cast<double>(c.hdbscan.min_samples);
    };
    const auto r = random_search(hdbscan_base(), space, 12, seed, objective);
    REQUIRE(r.trials.size() == 12);
    double best = -1e300;
    for (const auto& t : r.trials) {
      REQUIRE(t.score == objective(t.config));
      REQUIRE(t.config.hdbscan.min_cluster_size >= 2);
      REQUIRE(t.config.hdbscan.min_cluster_size <= 15);
      REQUIRE(t.config.hdbscan.min_samples >= 1);
      REQUIRE(t.config.hdbscan.min_samples <= t.config.hdbscan.min_cluster_size);
      best = std::max(best, t.score);
    }
    CHECK(r.best_score == best);
    CHECK(objective(r.best) == best);
  }
}

TEST_CASE("random_search ties go to the smaller size parameter", "[tune]") {
  SearchSpace space;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto r = random_search(hdbscan_base(), space, 10, seed, [](const ClusteringConfig&) { return 1.0; });
    std::size_t smallest = 100;
    for (const auto& t : r.trials) smallest = std::min(smallest, t.config.hdbscan.min_cluster_size);
    CHECK(r.best.hdbscan.min_cluster_size == smallest);
    // Among the smallest, the earliest trial wins.
    const auto first = std::find_if(r.trials.begin(), r.trials.end(), [&](const TuneTrial& t) {
      return t.config.hdbscan.min_cluster_size == smallest;
    });
    CHECK(r.best == first->config);

    ClusteringConfig km;
    km.kind = Clusterer::KMeans;
    r = random_search(km, space, 10, seed, [](const ClusteringConfig&) { return 0.0; });
    int kmin = 100;
    for (const auto& t : r.trials) {
      REQUIRE(t.config.kind == Clusterer::KMeans);
      kmin = std::min(kmin, t.config.k);
    }
    CHECK(r.best.k == kmin);
  }
}

TEST_CASE("tune_clustering refuses empty splits", "[tune]") {
  const auto users = themed_users(6, 0);
  TrainConfig tc;
  CHECK_THROWS_AS(tune_clustering(users, {}, hdbscan_base(), tc, 16, {}, 0), ConfigError);
  CHECK_THROWS_AS(tune_clustering({}, users, hdbscan_base(), tc, 16, {}, 0), ConfigError);
}

TEST_CASE("tune_clustering records every trial in range", "[tune]") {
  const auto users = themed_users(24, 3);
  std::vector<UserRecord> fit(users.begin(), users.begin() + 18), val(users.begin() + 18, users.end());
  TuneOptions opt;
  opt.budget = 3;
  opt.epochs = 2;
  const auto r = tune_clustering(fit, val, hdbscan_base(), TrainConfig{}, 16, opt, 5);
  REQUIRE(r.trials.size() == 3);
  for (const auto& t : r.trials) {
    CHECK(t.score >= 0);
    CHECK(t.score <= 1);
  }
  const auto again = tune_clustering(fit, val, hdbscan_base(), TrainConfig{}, 16, opt, 5);
  CHECK(again.best == r.best);
  CHECK(again.best_score == r.best_score);
}

TEST_CASE("pooled themed tweets recover the theme count", "[cluster][tune]") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SynthOptions o;
    o.n_users = 20;
    o.seed = seed;
    o.depressive_share = 0.25;
    o.incidental_share = 0.25;
    UserRecord pooled;
    pooled.user_id = "pooled";
    for (const auto& u : synth_generate(o).users) pooled.tweets.insert(pooled.tweets.end(), u.tweets.begin(), u.tweets.end());
    ClusteringConfig c;
    c.hdbscan = {10, 5, Metric::Euclidean};
    c.e_max = 1000;
    const auto r = hdbscan_run(sentence_embed(pooled), c.hdbscan);
    const auto n = static_cast<long>(r.selected_clusters.size());
    CHECK(std::abs(n - static_cast<long>(o.n_themes)) <= 1);
  }
}

TEST_CASE("cluster_users is independent of the pool size", "[cluster]") {
  const auto users = themed_users(30, 1);
  for (auto kind : {Clusterer::Hdbscan, Clusterer::KMeans}) {
    ClusteringConfig c = hdbscan_base();
    c.kind = kind;
    std::vector<ClusterAssignment> serial(users.size()), pooled(users.size());
    parallel_for(users.size(), [&](std::size_t i) { serial[i] = cluster_user(users[i], c, 11); }, 1);
    parallel_for(users.size(), [&](std::size_t i) { pooled[i] = cluster_user(users[i], c, 11); }, 4);
    CHECK(serial == pooled);
    CHECK(cluster_users(users, c, 11) == serial);
    for (std::size_t i = 0; i < users.size(); ++i) validate_assignment(serial[i], users[i].tweets.size());
  }
}

TEST_CASE("parallel_for runs each index once and rethrows", "[cluster]") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, 4);
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 3) throw NumericalError("boom");
                  }, 3),
                  NumericalError);
}

TEST_CASE("summarize uses the sample standard deviation", "[cv]") {
  const auto s = summarize({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(s.mean == 5.0);
  CHECK(s.stddev == Catch::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-14));
  CHECK(s.min == 2.0);
  CHECK(s.max == 9.0);
  const auto one = summarize({0.75});
  CHECK(one.mean == 0.75);
  CHECK(one.stddev == 0.0);
}

TEST_CASE("split_holdout partitions the training ids", "[cv]") {
  std::vector<std::string> ids;
  for (int i = 0; i < 17; ++i) ids.push_back("u" + std::to_string(100 + i));
  std::vector<std::string> fit, val;
  detail::split_holdout(ids, 0.2, 4, fit, val);
  CHECK(val.size() == 3);
  CHECK(fit.size() == 14);
  std::set<std::string> all(fit.begin(), fit.end());
  all.insert(val.begin(), val.end());
  CHECK(all.size() == 17);
  CHECK(std::is_sorted(fit.begin(), fit.end()));
  detail::split_holdout({"a", "b"}, 0.0, 1, fit, val);
  CHECK(val.size() == 1);
  CHECK(fit.size() == 1);
}

TEST_CASE("cross_validate on separable users", "[cv]") {
  SynthOptions o;
  o.n_users = 40;
  o.seed = 2;
  const auto d = synth_generate(o);
  CvConfig cfg;
  cfg.tune = false;
  cfg.clustering = hdbscan_base();
  cfg.train.epochs = 20;
  const auto r = cross_validate(d, cfg);
  REQUIRE(r.folds.size() == 5);
  CHECK(r.f1.mean == 1.0);
  CHECK(r.accuracy.mean == 1.0);
  std::set<std::string> seen;
  for (const auto& f : r.folds) {
    seen.insert(f.test_ids.begin(), f.test_ids.end());
    CHECK(f.epoch_loss.size() == 20);
  }
  CHECK(seen.size() == 40);
  for (const auto* s : {&r.precision, &r.recall, &r.f1, &r.accuracy}) {
    CHECK(s->min <= s->mean);
    CHECK(s->mean <= s->max);
  }

  SECTION("user order in the file does not matter") {
    Dataset shuffled = d;
    std::reverse(shuffled.users.begin(), shuffled.users.end());
    const auto again = cross_validate(shuffled, cfg);
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(again.folds[k].test_ids == r.folds[k].test_ids);
      CHECK(again.folds[k].epoch_loss == r.folds[k].epoch_loss);
    }
  }
}

TEST_CASE("cross_validate summary lies within fold extremes on noisy data", "[cv]") {
  SynthOptions o;
  o.n_users = 30;
  o.n_themes = 12;
  o.seed = 4;
  const auto d = synth_narrative(o).data;
  CvConfig cfg;
  cfg.tune = false;
  cfg.folds = 3;
  cfg.train.epochs = 3;
  const auto r = cross_validate(d, cfg);
  for (const auto* s : {&r.precision, &r.recall, &r.f1, &r.accuracy}) {
    CHECK(s->min <= s->mean);
    CHECK(s->mean <= s->max);
    CHECK(s->stddev >= 0);
  }
}

TEST_CASE("cross_validate preconditions", "[cv]") {
  SynthOptions o;
  o.n_users = 10;
  auto d = synth_generate(o);
  d.users[3].tweets.resize(5);
  CvConfig cfg;
  cfg.tune = false;
  CHECK_THROWS_AS(cross_validate(d, cfg), PreconditionError);
  cfg.min_tweets = 5;
  cfg.train.dropout = 1.0;
  CHECK_THROWS_AS(cross_validate(d, cfg), ConfigError);
}
