#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "narrationdep/core/tensor.hpp"
#include "narrationdep/data/time.hpp"

namespace narrationdep {

/// One tweet: its timestamp and the word-embedding rows [token_count x d_w].
struct TweetRecord {
  UnixSeconds timestamp = 0;
  Tensor tokens;
  std::optional<std::string> raw_text;

  std::size_t token_count() const noexcept { return tokens.rows(); }
  std::size_t dim() const noexcept { return tokens.cols(); }

  bool operator==(const TweetRecord&) const = default;
};

/// 0 = non-depressed, 1 = depressed.
enum class Label : int { NonDepressed = 0, Depressed = 1 };

inline int to_int(Label l) noexcept { return static_cast<int>(l); }

struct UserRecord {
  std::string user_id;
  Label label = Label::NonDepressed;
  std::vector<TweetRecord> tweets;

  bool operator==(const UserRecord&) const = default;
};

struct Dataset {
  std::vector<UserRecord> users;
  std::size_t d_w = 0;  // 0 until the first record fixes it

  bool operator==(const Dataset&) const = default;

  const UserRecord* find(const std::string& id) const {
    for (const auto& u : users)
      if (u.user_id == id) return &u;
    return nullptr;
  }
};

}  // namespace narrationdep
