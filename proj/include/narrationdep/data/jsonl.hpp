#pragma once

#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "narrationdep/core/error.hpp"
#include "narrationdep/data/dataset.hpp"

namespace narrationdep {

inline constexpr const char* kEmbeddingFormat = "narrationdep-emb/1";

struct LoadOptions {
  std::size_t q_max = 64;   // tokens kept per tweet (head of the tweet)
  std::size_t l_max = 200;  // tweets kept per user (most recent)
};

namespace detail {

inline TweetRecord parse_tweet(const nlohmann::json& j, std::size_t& d_w, std::size_t line,
                               const LoadOptions& opt) {
  auto where = [&] { return "line " + std::to_string(line); };
  if (!j.is_object() || !j.contains("ts") || !j.contains("tokens")) {
    throw ParseError(where() + ": tweet needs \"ts\" and \"tokens\"");
  }
  TweetRecord t;
  try {
    t.timestamp = parse_utc(j.at("ts").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    throw ParseError(where() + ": \"ts\" must be a string");
  } catch (const ParseError& e) {
    throw ParseError(where() + ": " + e.what());
  }
  const auto& toks = j.at("tokens");
  if (!toks.is_array() || toks.empty()) {
    throw ParseError(where() + ": \"tokens\" must be a nonempty array");
  }
  const std::size_t n = std::min(toks.size(), opt.q_max);
  Vec data;
  for (std::size_t q = 0; q < n; ++q) {
    const auto& v = toks[q];
    if (!v.is_array() || v.empty()) throw ParseError(where() + ": token vector must be a nonempty array");
    if (d_w == 0) d_w = v.size();
    if (v.size() != d_w) {
      throw SchemaError(where() + ": token dimension " + std::to_string(v.size()) +
                        " does not match d_w=" + std::to_string(d_w));
    }
    for (const auto& x : v) {
      if (!x.is_number()) throw ParseError(where() + ": token values must be numbers");
      data.push_back(x.get<Real>());
    }
  }
  for (std::size_t q = n; q < toks.size(); ++q) {
    if (toks[q].is_array() && toks[q].size() != d_w) {
      throw SchemaError(where() + ": token dimension " + std::to_string(toks[q].size()) +
                        " does not match d_w=" + std::to_string(d_w));
    }
  }
  t.tokens = Tensor::matrix(n, d_w, std::move(data));
  if (j.contains("text") && j.at("text").is_string()) t.raw_text = j.at("text").get<std::string>();
  return t;
}

}  // namespace detail

/// Parses an embedding file. The optional first line is the manifest
/// {"format":"narrationdep-emb/1","d_w":N}; every other line is one user.
/// Tweets are kept in file order.
inline Dataset load_jsonl(std::istream& in, const LoadOptions& opt = {}) {
  Dataset d;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError("line " + std::to_string(lineno) + ": expected an object");
    if (j.contains("format")) {
      if (j["format"] != kEmbeddingFormat) {
        throw SchemaError("line " + std::to_string(lineno) + ": unsupported format " +
                          j["format"].dump());
      }
      if (!j.contains("d_w") || !j["d_w"].is_number_unsigned() || j["d_w"].get<std::size_t>() == 0) {
        throw SchemaError("line " + std::to_string(lineno) + ": manifest needs a positive d_w");
      }
      const auto declared = j["d_w"].get<std::size_t>();
      if (d.d_w != 0 && d.d_w != declared) {
        throw SchemaError("line " + std::to_string(lineno) + ": manifest d_w disagrees with data");
      }
      d.d_w = declared;
      continue;
    }
    if (!j.contains("user_id") || !j["user_id"].is_string() || !j.contains("label") ||
        !j.contains("tweets") || !j["tweets"].is_array()) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": user record needs string user_id, label and tweets array");
    }
    UserRecord u;
    u.user_id = j["user_id"].get<std::string>();
    if (!j["label"].is_number_integer() || (j["label"] != 0 && j["label"] != 1)) {
      throw ParseError("line " + std::to_string(lineno) + ": label must be 0 or 1");
    }
    u.label = j["label"] == 1 ? Label::Depressed : Label::NonDepressed;
    if (!seen.insert(u.user_id).second) {
      throw SchemaError("line " + std::to_string(lineno) + ": duplicate user_id '" + u.user_id + "'");
    }
    const auto& tweets = j["tweets"];
    if (tweets.empty()) {
      throw SchemaError("line " + std::to_string(lineno) + ": user '" + u.user_id + "' has no tweets");
    }
    const std::size_t skip = tweets.size() > opt.l_max ? tweets.size() - opt.l_max : 0;
    for (std::size_t k = 0; k < tweets.size(); ++k) {
      auto t = detail::parse_tweet(tweets[k], d.d_w, lineno, opt);
      if (k >= skip) u.tweets.push_back(std::move(t));
    }
    d.users.push_back(std::move(u));
  }
  return d;
}

inline Dataset load_jsonl(const std::string& path, const LoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_jsonl(in, opt);
}

inline nlohmann::json user_to_json(const UserRecord& u) {
  nlohmann::json tweets = nlohmann::json::array();
  for (const auto& t : u.tweets) {
    nlohmann::json toks = nlohmann::json::array();
    for (std::size_t q = 0; q < t.token_count(); ++q) {
      auto row = t.tokens.row(q);
      toks.push_back(Vec(row.begin(), row.end()));
    }
    nlohmann::json jt = {{"ts", format_utc(t.timestamp)}, {"tokens", std::move(toks)}};
    if (t.raw_text) jt["text"] = *t.raw_text;
    tweets.push_back(std::move(jt));
  }
  return {{"user_id", u.user_id}, {"label", to_int(u.label)}, {"tweets", std::move(tweets)}};
}

/// Writes the manifest line followed by one line per user. Numbers are
/// emitted in shortest round-trip form, so load_jsonl(write_jsonl(d)) == d.
inline void write_jsonl(const Dataset& d, std::ostream& out) {
  out << nlohmann::json{{"format", kEmbeddingFormat}, {"d_w", d.d_w}}.dump() << '\n';
  for (const auto& u : d.users) out << user_to_json(u).dump() << '\n';
}

inline void write_jsonl(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_jsonl(d, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace narrationdep
