#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "narrationdep/core/error.hpp"
#include "narrationdep/core/rng.hpp"
#include "narrationdep/data/dataset.hpp"

namespace narrationdep {

struct SynthOptions {
  std::size_t n_users = 200;
  std::size_t tweets_per_user = 20;
  std::size_t d_w = 16;
  std::size_t n_themes = 4;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;

  std::size_t tokens_per_tweet = 4;
  // Theme 0 is the depressive theme.
  double depressive_share = 0.6;  // of a depressed user's tweets
  double incidental_share = 0.0;  // of a non-depressed user's tweets
  // Per-theme multiplier on noise_sigma; empty means 1 for every theme.
  std::vector<double> theme_spread;
};

/// Generated data plus the theme index behind every tweet.
struct SynthResult {
  Dataset data;
  std::vector<std::vector<int>> themes;  // [user][tweet]
  std::vector<Vec> centers;              // [theme][d_w]
};

namespace detail {

inline constexpr UnixSeconds kSynthStart = 1480550400;  // 2016-12-01T00:00:00Z
inline constexpr UnixSeconds kSynthSpan = 30 * 86400;

inline std::vector<Vec> draw_centers(const SynthOptions& o, Rng& rng) {
  std::vector<Vec> centers(o.n_themes, Vec(o.d_w));
  for (auto& c : centers)
    for (auto& x : c) x = static_cast<Real>(rng.normal());
  return centers;
}

inline TweetRecord make_tweet(const SynthOptions& o, const std::vector<Vec>& centers, int theme,
                              UnixSeconds ts, Rng& rng) {
  const double spread = o.theme_spread.empty() ? 1.0 : o.theme_spread.at(theme);
  const double sigma = o.noise_sigma * spread;
  Vec data;
  data.reserve(o.tokens_per_tweet * o.d_w);
  for (std::size_t q = 0; q < o.tokens_per_tweet; ++q)
    for (std::size_t k = 0; k < o.d_w; ++k)
      data.push_back(static_cast<Real>(centers[theme][k] + (sigma > 0 ? sigma * rng.normal() : 0.0)));
  TweetRecord t;
  t.timestamp = ts;
  t.tokens = Tensor::matrix(o.tokens_per_tweet, o.d_w, std::move(data));
  t.raw_text = "synthetic tweet on theme " + std::to_string(theme);
  return t;
}

inline std::vector<UnixSeconds> draw_timestamps(std::size_t n, Rng& rng) {
  std::vector<UnixSeconds> ts(n);
  for (auto& t : ts) t = kSynthStart + rng.uniform_int(0, kSynthSpan - 1);
  std::sort(ts.begin(), ts.end());
  return ts;
}

inline std::string synth_user_id(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "user-%04zu", i);
  return buf;
}

inline void validate(const SynthOptions& o) {
  if (o.n_themes < 2) throw ConfigError("synth_generate: n_themes must be at least 2");
  if (o.d_w == 0 || o.tweets_per_user == 0 || o.tokens_per_tweet == 0)
    throw ConfigError("synth_generate: dimensions must be positive");
  if (!o.theme_spread.empty() && o.theme_spread.size() != o.n_themes)
    throw ConfigError("synth_generate: theme_spread needs one entry per theme");
}

}  // namespace detail

/// Themed users: depressed users post a `depressive_share` majority on theme
/// 0 and the rest uniformly on the other themes; non-depressed users post on
/// themes 1..n-1 (plus `incidental_share` on theme 0). Labels alternate, so
/// classes are balanced to within one user.
inline SynthResult synth_generate_with_truth(const SynthOptions& o) {
  detail::validate(o);
  Rng rng(derive_seed(o.seed, "synth"));
  SynthResult r;
  r.centers = detail::draw_centers(o, rng);
  r.data.d_w = o.d_w;
  const std::size_t T = o.tweets_per_user;
  for (std::size_t i = 0; i < o.n_users; ++i) {
    UserRecord u;
    u.user_id = detail::synth_user_id(i);
    u.label = i % 2 == 1 ? Label::Depressed : Label::NonDepressed;
    const double share = u.label == Label::Depressed ? o.depressive_share : o.incidental_share;
    const auto n_dep = static_cast<std::size_t>(std::lround(share * static_cast<double>(T)));
    std::vector<int> themes(T);
    for (std::size_t k = 0; k < T; ++k) {
      themes[k] = k < n_dep ? 0
                            : static_cast<int>(rng.uniform_int(1, static_cast<std::int64_t>(o.n_themes) - 1));
    }
    rng.shuffle(themes);
    const auto ts = detail::draw_timestamps(T, rng);
    for (std::size_t k = 0; k < T; ++k)
      u.tweets.push_back(detail::make_tweet(o, r.centers, themes[k], ts[k], rng));
    r.data.users.push_back(std::move(u));
    r.themes.push_back(std::move(themes));
  }
  return r;
}

inline Dataset synth_generate(const SynthOptions& o) { return synth_generate_with_truth(o).data; }

/// Two independent routes to a positive label. Every user carries a block of
/// `cue_share` tweets on the last theme ("cue"). Negatives post the cue block
/// first; cue-positives post it last (a tweet-order signal); theme-positives
/// post it first but also carry the depressive theme majority (a cluster-level
/// signal).
inline SynthResult synth_two_signal(const SynthOptions& o, double cue_share = 0.25) {
  detail::validate(o);
  if (o.n_themes < 3) throw ConfigError("synth_two_signal: needs at least 3 themes");
  Rng rng(derive_seed(o.seed, "synth-two-signal"));
  SynthResult r;
  r.centers = detail::draw_centers(o, rng);
  r.data.d_w = o.d_w;
  const std::size_t T = o.tweets_per_user;
  const int cue = static_cast<int>(o.n_themes) - 1;
  const auto n_cue = static_cast<std::size_t>(std::lround(cue_share * static_cast<double>(T)));
  for (std::size_t i = 0; i < o.n_users; ++i) {
    UserRecord u;
    u.user_id = detail::synth_user_id(i);
    const bool positive = i % 2 == 1;
    const bool order_route = positive && (i / 2) % 2 == 0;
    const bool theme_route = positive && !order_route;
    u.label = positive ? Label::Depressed : Label::NonDepressed;

    const std::size_t rest = T - n_cue;
    const auto n_dep = theme_route
                           ? static_cast<std::size_t>(std::lround(o.depressive_share * static_cast<double>(T)))
                           : 0;
    std::vector<int> body(rest);
    for (std::size_t k = 0; k < rest; ++k) {
      body[k] = k < n_dep ? 0 : static_cast<int>(rng.uniform_int(1, cue - 1));
    }
    rng.shuffle(body);
    std::vector<int> themes;
    if (order_route) {
      themes = body;
      themes.insert(themes.end(), n_cue, cue);
    } else {
      themes.assign(n_cue, cue);
      themes.insert(themes.end(), body.begin(), body.end());
    }
    const auto ts = detail::draw_timestamps(T, rng);
    for (std::size_t k = 0; k < T; ++k)
      u.tweets.push_back(detail::make_tweet(o, r.centers, themes[k], ts[k], rng));
    r.data.users.push_back(std::move(u));
    r.themes.push_back(std::move(themes));
  }
  return r;
}

/// Users with recurring threads over many shared themes. Everyone has a
/// routine block of `routine` tweets on one random theme; depressed users add
/// a second block of `narrative` tweets on a different random theme. The rest
/// are scattered with at most `scatter_cap` tweets per theme, so the label is
/// carried by how many coherent threads a user has, not by any single theme.
struct NarrativeOptions {
  std::size_t routine = 6;
  std::size_t narrative = 8;
  std::size_t scatter_cap = 2;
};

inline SynthResult synth_narrative(const SynthOptions& o, const NarrativeOptions& n = {}) {
  detail::validate(o);
  if (o.n_themes < 3) throw ConfigError("synth_narrative: needs at least 3 themes");
  const std::size_t T = o.tweets_per_user;
  if (n.routine + n.narrative > T) throw ConfigError("synth_narrative: thread blocks exceed tweets_per_user");
  if ((o.n_themes - 2) * n.scatter_cap < T - n.routine) {
    throw ConfigError("synth_narrative: scatter_cap too small to fill the remaining tweets");
  }
  Rng rng(derive_seed(o.seed, "synth-narrative"));
  SynthResult r;
  r.centers = detail::draw_centers(o, rng);
  r.data.d_w = o.d_w;
  const auto last = static_cast<std::int64_t>(o.n_themes) - 1;
  for (std::size_t i = 0; i < o.n_users; ++i) {
    UserRecord u;
    u.user_id = detail::synth_user_id(i);
    u.label = i % 2 == 1 ? Label::Depressed : Label::NonDepressed;
    std::vector<int> themes;
    std::vector<std::size_t> used(o.n_themes, 0);
    const auto routine = static_cast<int>(rng.uniform_int(0, last));
    themes.insert(themes.end(), n.routine, routine);
    used[static_cast<std::size_t>(routine)] = T;
    if (u.label == Label::Depressed) {
      int thread = routine;
      while (thread == routine) thread = static_cast<int>(rng.uniform_int(0, last));
      themes.insert(themes.end(), n.narrative, thread);
      used[static_cast<std::size_t>(thread)] = T;
    }
    while (themes.size() < T) {
      const auto t = static_cast<int>(rng.uniform_int(0, last));
      if (used[static_cast<std::size_t>(t)] >= n.scatter_cap) continue;
      ++used[static_cast<std::size_t>(t)];
      themes.push_back(t);
    }
    rng.shuffle(themes);
    const auto ts = detail::draw_timestamps(T, rng);
    for (std::size_t k = 0; k < T; ++k)
      u.tweets.push_back(detail::make_tweet(o, r.centers, themes[k], ts[k], rng));
    r.data.users.push_back(std::move(u));
    r.themes.push_back(std::move(themes));
  }
  return r;
}

}  // namespace narrationdep
