#pragma once

#include <string>
#include <vector>

#include "narrationdep/data/dataset.hpp"
#include "narrationdep/model/encoder.hpp"

namespace narrationdep {

struct HanParams {
  LevelParams word;   // BiGRU over token vectors + word attention
  LevelParams tweet;  // BiGRU over tweet vectors + tweet attention
};

template <ParamsOf<HanParams> P, class F>
void visit_params(P& p, const std::string& prefix, F&& f) {
  visit_params(p.word, prefix + ".word", f);
  visit_params(p.tweet, prefix + ".tweet", f);
}

/// Per-tweet word-level encodings of one user.
struct WordLevelOutput {
  std::vector<Vec> tweet_vectors;  // [tweet][2 d_h]
  std::vector<Vec> word_weights;   // [tweet][token]
  std::vector<LevelCache> caches;  // filled only when requested
};

inline WordLevelOutput encode_words(const UserRecord& user, const LevelParams& word, bool keep_cache = false) {
  if (user.tweets.empty()) throw PreconditionError("encode_words: user '" + user.user_id + "' has no tweets");
  WordLevelOutput out;
  const std::size_t n = user.tweets.size();
  out.tweet_vectors.reserve(n);
  out.word_weights.reserve(n);
  if (keep_cache) out.caches.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto r = encode_level(user.tweets[j].tokens, word, keep_cache ? &out.caches[j] : nullptr);
    out.tweet_vectors.push_back(std::move(r.context));
    out.word_weights.push_back(std::move(r.weights));
  }
  return out;
}

inline void encode_words_backward(const WordLevelOutput& fwd, const LevelParams& word,
                                  const std::vector<Vec>& dtweet_vectors, LevelParams& g) {
  for (std::size_t j = 0; j < fwd.caches.size(); ++j) {
    bool nonzero = false;
    for (Real v : dtweet_vectors[j]) nonzero |= v != Real(0);
    if (nonzero) encode_level_backward(fwd.caches[j], word, dtweet_vectors[j], g);
  }
}

struct HanTrace {
  std::vector<Vec> word_weights;  // alpha_nq per tweet
  Vec tweet_weights;              // alpha_n
};

struct HanOutput {
  Vec s;  // user vector, width 2 d_h
  HanTrace trace;
};

/// Tweet level of HAN: BiGRU over the chronological tweet vectors, then
/// attention pooling into the user vector s.
inline HanOutput han_tweet_level(const std::vector<Vec>& tweet_vectors, const LevelParams& tweet,
                                 LevelCache* cache = nullptr) {
  auto r = encode_level(stack_rows(tweet_vectors), tweet, cache);
  HanOutput out;
  out.s = std::move(r.context);
  out.trace.tweet_weights = std::move(r.weights);
  return out;
}

/// Returns d(tweet vectors).
inline std::vector<Vec> han_tweet_level_backward(const LevelCache& cache, const LevelParams& tweet,
                                                 std::span<const Real> ds, LevelParams& g) {
  const Tensor dx = encode_level_backward(cache, tweet, ds, g);
  std::vector<Vec> out(dx.rows());
  for (std::size_t i = 0; i < dx.rows(); ++i) out[i].assign(dx.row(i).begin(), dx.row(i).end());
  return out;
}

/// Full HAN branch over the user's unclustered timeline.
inline HanOutput han_encode(const UserRecord& user, const HanParams& p) {
  auto words = encode_words(user, p.word);
  auto out = han_tweet_level(words.tweet_vectors, p.tweet);
  out.trace.word_weights = std::move(words.word_weights);
  return out;
}

}  // namespace narrationdep
