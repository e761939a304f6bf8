#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "narrationdep/data/time.hpp"
#include "narrationdep/model/model.hpp"

namespace narrationdep {

enum class Granularity { Weekday, Hour };

inline std::string to_string(Granularity g) { return g == Granularity::Weekday ? "weekday" : "hour"; }

inline Granularity granularity_from_string(const std::string& s) {
  if (s == "weekday") return Granularity::Weekday;
  if (s == "hour") return Granularity::Hour;
  throw ConfigError("unknown granularity '" + s + "' (expected weekday or hour)");
}

struct RankedCluster {
  int id = 0;
  double weight = 0;
  std::vector<std::size_t> members;
  std::vector<std::string> texts;  // filled only when every member has raw text

  bool operator==(const RankedCluster&) const = default;
};

/// Clusters by descending alpha_i; equal weights keep ascending id order.
inline std::vector<RankedCluster> rank_clusters(const AttentionTrace& trace) {
  if (trace.clusters.size() != trace.cluster_weights.size()) {
    throw ConsistencyError("rank_clusters: " + std::to_string(trace.clusters.size()) + " clusters but " +
                           std::to_string(trace.cluster_weights.size()) + " cluster weights");
  }
  std::vector<RankedCluster> out;
  for (std::size_t i = 0; i < trace.clusters.size(); ++i)
    out.push_back({trace.clusters[i].id, static_cast<double>(trace.cluster_weights[i]), trace.clusters[i].members, {}});
  std::stable_sort(out.begin(), out.end(), [](const RankedCluster& a, const RankedCluster& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.id < b.id;
  });
  return out;
}

/// salience(t) = alpha_i(cluster of t) * alpha_ij(t). Every tweet must belong
/// to exactly one traced cluster.
inline std::vector<double> tweet_salience(const AttentionTrace& trace, std::size_t n_tweets) {
  if (trace.clusters.size() != trace.cluster_weights.size())
    throw ConsistencyError("tweet_salience: cluster weights do not match the traced clusters");
  std::vector<double> s(n_tweets, 0.0);
  std::vector<int> covered(n_tweets, 0);
  for (std::size_t i = 0; i < trace.clusters.size(); ++i) {
    const auto& c = trace.clusters[i];
    if (c.tweet_weights.size() != c.members.size())
      throw ConsistencyError("tweet_salience: cluster " + std::to_string(c.id) + " has mismatched weights");
    for (std::size_t j = 0; j < c.members.size(); ++j) {
      const auto t = c.members[j];
      if (t >= n_tweets) {
        throw ConsistencyError("tweet_salience: cluster " + std::to_string(c.id) + " names tweet " +
                               std::to_string(t) + " of " + std::to_string(n_tweets));
      }
      ++covered[t];
      s[t] = static_cast<double>(trace.cluster_weights[i]) * static_cast<double>(c.tweet_weights[j]);
    }
  }
  for (std::size_t t = 0; t < n_tweets; ++t) {
    if (covered[t] != 1) {
      throw ConsistencyError("tweet_salience: tweet " + std::to_string(t) + " belongs to " +
                             std::to_string(covered[t]) + " clusters");
    }
  }
  return s;
}

/// Salience mass per weekday (Monday first) or per hour, in UTC shifted by
/// `offset_seconds`, normalised to sum 1. Empty buckets stay 0.
inline std::vector<double> temporal_profile(const std::vector<UnixSeconds>& timestamps,
                                            const std::vector<double>& salience, Granularity g,
                                            std::int64_t offset_seconds = 0) {
  if (timestamps.size() != salience.size()) {
    throw InputError("temporal_profile: " + std::to_string(salience.size()) + " salience values but " +
                     std::to_string(timestamps.size()) + " timestamps");
  }
  std::vector<double> p(g == Granularity::Weekday ? 7 : 24, 0.0);
  double total = 0;
  for (std::size_t t = 0; t < timestamps.size(); ++t) {
    if (!(salience[t] >= 0) || !std::isfinite(salience[t]))
      throw NumericalError("temporal_profile: invalid salience at tweet " + std::to_string(t));
    const int b = g == Granularity::Weekday ? weekday_monday_first(timestamps[t], offset_seconds)
                                            : hour_of_day(timestamps[t], offset_seconds);
    p[static_cast<std::size_t>(b)] += salience[t];
    total += salience[t];
  }
  if (total <= 0) throw NumericalError("temporal_profile: salience sums to zero");
  for (auto& v : p) v /= total;
  return p;
}

inline std::vector<double> temporal_profile(const UserRecord& u, const std::vector<double>& salience, Granularity g,
                                            std::int64_t offset_seconds = 0) {
  std::vector<UnixSeconds> ts;
  for (const auto& t : u.tweets) ts.push_back(t.timestamp);
  return temporal_profile(ts, salience, g, offset_seconds);
}

struct NarrativeReport {
  std::string user_id;
  std::optional<int> label;
  double probability = 0;
  std::vector<RankedCluster> clusters;
  std::vector<double> salience;  // per tweet
  std::vector<int> cluster_of;   // per tweet
  std::vector<UnixSeconds> timestamps;
  std::vector<std::optional<std::string>> texts;
  std::int64_t utc_offset_seconds = 0;
  std::vector<double> weekday;  // 7 buckets, Monday first
  std::vector<double> hour;     // 24 buckets

  bool operator==(const NarrativeReport&) const = default;
};

/// Builds the report from a recorded trace; the trace must come from the
/// HACN branch (clusters and weights present).
inline NarrativeReport build_report(const UserRecord& u, const AttentionTrace& trace, double probability,
                                    std::int64_t utc_offset_seconds = 0) {
  NarrativeReport r;
  r.user_id = u.user_id;
  r.label = to_int(u.label);
  r.probability = probability;
  r.utc_offset_seconds = utc_offset_seconds;
  r.salience = tweet_salience(trace, u.tweets.size());
  r.clusters = rank_clusters(trace);
  r.cluster_of.assign(u.tweets.size(), -1);
  for (const auto& c : r.clusters)
    for (auto t : c.members) r.cluster_of[t] = c.id;
  for (const auto& t : u.tweets) {
    r.timestamps.push_back(t.timestamp);
    r.texts.push_back(t.raw_text);
  }
  for (auto& c : r.clusters) {
    const bool all_text = std::all_of(c.members.begin(), c.members.end(), [&](std::size_t t) { return r.texts[t].has_value(); });
    if (all_text)
      for (auto t : c.members) c.texts.push_back(*r.texts[t]);
  }
  r.weekday = temporal_profile(r.timestamps, r.salience, Granularity::Weekday, utc_offset_seconds);
  r.hour = temporal_profile(r.timestamps, r.salience, Granularity::Hour, utc_offset_seconds);
  return r;
}

/// Runs the model in evaluation mode and explains its decision for one user.
inline NarrativeReport explain_user(const UserRecord& u, const ClusterAssignment& a, const ModelParams& m,
                                    std::int64_t utc_offset_seconds = 0) {
  const auto fr = forward_user(u, a, m);
  return build_report(u, fr.trace, fr.y_hat, utc_offset_seconds);
}

inline nlohmann::json to_json(const NarrativeReport& r) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : r.clusters) {
    nlohmann::json jc = {{"id", c.id}, {"weight", c.weight}, {"members", c.members}};
    if (!c.texts.empty()) jc["texts"] = c.texts;
    clusters.push_back(std::move(jc));
  }
  nlohmann::json tweets = nlohmann::json::array();
  for (std::size_t t = 0; t < r.salience.size(); ++t) {
    nlohmann::json jt = {{"index", t}, {"ts", format_utc(r.timestamps[t])}, {"salience", r.salience[t]},
                         {"cluster", r.cluster_of[t]}};
    if (r.texts[t]) jt["text"] = *r.texts[t];
    tweets.push_back(std::move(jt));
  }
  nlohmann::json j = {{"user_id", r.user_id},
                      {"probability", r.probability},
                      {"clusters", clusters},
                      {"tweets", tweets},
                      {"utc_offset_seconds", r.utc_offset_seconds},
                      {"weekday_profile", r.weekday},
                      {"hour_profile", r.hour}};
  j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
  return j;
}

inline NarrativeReport report_from_json(const nlohmann::json& j) {
  NarrativeReport r;
  try {
    r.user_id = j.at("user_id").get<std::string>();
    if (!j.at("label").is_null()) r.label = j.at("label").get<int>();
    r.probability = j.at("probability").get<double>();
    r.utc_offset_seconds = j.at("utc_offset_seconds").get<std::int64_t>();
    r.weekday = j.at("weekday_profile").get<std::vector<double>>();
    r.hour = j.at("hour_profile").get<std::vector<double>>();
    for (const auto& jc : j.at("clusters")) {
      RankedCluster c{jc.at("id").get<int>(), jc.at("weight").get<double>(),
                      jc.at("members").get<std::vector<std::size_t>>(), {}};
      if (jc.contains("texts")) c.texts = jc.at("texts").get<std::vector<std::string>>();
      r.clusters.push_back(std::move(c));
    }
    for (const auto& jt : j.at("tweets")) {
      r.timestamps.push_back(parse_utc(jt.at("ts").get<std::string>()));
      r.salience.push_back(jt.at("salience").get<double>());
      r.cluster_of.push_back(jt.at("cluster").get<int>());
      r.texts.push_back(jt.contains("text") ? std::optional(jt.at("text").get<std::string>()) : std::nullopt);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("narrative report: ") + e.what());
  }
  if (r.weekday.size() != 7 || r.hour.size() != 24) throw SchemaError("narrative report: profile length");
  return r;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Heatmap rows: one per tweet, in tweet order.
inline std::string report_csv(const NarrativeReport& r) {
  std::string out = "tweet_index,ts,salience,cluster_id,text\n";
  for (std::size_t t = 0; t < r.salience.size(); ++t) {
    out += std::to_string(t) + "," + format_utc(r.timestamps[t]) + "," + detail::fmt_real(r.salience[t]) + "," +
           std::to_string(r.cluster_of[t]) + "," + (r.texts[t] ? detail::csv_field(*r.texts[t]) : "") + "\n";
  }
  return out;
}

/// Profile rows: bucket label and weight.
inline std::string profile_csv(const NarrativeReport& r, Granularity g) {
  static const char* kDays[] = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
  const auto& p = g == Granularity::Weekday ? r.weekday : r.hour;
  std::string out = to_string(g) + ",weight\n";
  for (std::size_t b = 0; b < p.size(); ++b)
    out += (g == Granularity::Weekday ? std::string(kDays[b]) : std::to_string(b)) + "," + detail::fmt_real(p[b]) + "\n";
  return out;
}

enum class ReportFormat { Json, Csv };

inline ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw ConfigError("unknown report format '" + s + "' (expected json or csv)");
}

inline void export_report(const NarrativeReport& r, const std::filesystem::path& path, ReportFormat f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << (f == ReportFormat::Json ? to_json(r).dump(2) + "\n" : report_csv(r));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace narrationdep
