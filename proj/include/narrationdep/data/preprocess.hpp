#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "narrationdep/core/error.hpp"
#include "narrationdep/core/rng.hpp"
#include "narrationdep/data/dataset.hpp"

namespace narrationdep {

/// Drops users with fewer than `min_tweets` tweets; order is preserved.
inline Dataset filter_min_tweets(const Dataset& d, std::size_t min_tweets = 10) {
  Dataset out;
  out.d_w = d.d_w;
  for (const auto& u : d.users)
    if (u.tweets.size() >= min_tweets) out.users.push_back(u);
  return out;
}

struct FoldSplit {
  std::size_t fold = 0;
  std::vector<std::string> train_ids;  // sorted
  std::vector<std::string> test_ids;   // sorted
};

/// Seeded k-fold partition of user ids. Ids are sorted before shuffling, so
/// the folds depend only on the id set and the seed, not on insertion order.
inline std::vector<FoldSplit> kfold_split(const Dataset& d, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold_split: k must be at least 2, got " + std::to_string(k));
  if (d.users.size() < k) {
    throw ConfigError("kfold_split: " + std::to_string(d.users.size()) + " users cannot fill " +
                      std::to_string(k) + " folds");
  }
  std::vector<std::string> ids;
  for (const auto& u : d.users) ids.push_back(u.user_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, "kfold"));
  rng.shuffle(ids);

  const std::size_t n = ids.size();
  std::vector<FoldSplit> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].fold = f;
    const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
    for (std::size_t i = 0; i < n; ++i) {
      (i >= lo && i < hi ? folds[f].test_ids : folds[f].train_ids).push_back(ids[i]);
    }
    std::sort(folds[f].train_ids.begin(), folds[f].train_ids.end());
    std::sort(folds[f].test_ids.begin(), folds[f].test_ids.end());
  }
  return folds;
}

/// Users of `d` whose ids appear in `ids`, in the order of `ids`.
inline std::vector<UserRecord> select_users(const Dataset& d, const std::vector<std::string>& ids) {
  std::vector<UserRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const UserRecord* u = d.find(id);
    if (!u) throw ConsistencyError("unknown user id '" + id + "'");
    out.push_back(*u);
  }
  return out;
}

}  // namespace narrationdep
