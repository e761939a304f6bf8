#pragma once

// Command-line front end. Needs CLI11.hpp on the include path (vendor/).

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "narrationdep/cluster/clustering.hpp"
#include "narrationdep/cluster/tune.hpp"
#include "narrationdep/data/jsonl.hpp"
#include "narrationdep/data/preprocess.hpp"
#include "narrationdep/data/synth.hpp"
#include "narrationdep/eval/cross_validate.hpp"
#include "narrationdep/explain/narrative.hpp"
#include "narrationdep/model/checkpoint.hpp"

#ifndef NARRATIONDEP_VERSION
#define NARRATIONDEP_VERSION "0.0.0"
#endif

namespace narrationdep::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

inline int exit_code_for(const Error& e) {
  if (e.kind() == "config") return kExitUsage;
  if (e.kind() == "numerical") return kExitNumerical;
  return kExitData;
}

/// Everything a run needs. Resolution order: defaults, then the flat JSON
/// config file, then command-line flags.
struct PipelineConfig {
  std::string data, out, assignments, checkpoint;
  std::uint64_t seed = 0;
  TrainConfig train;
  ClusteringConfig clustering;
  bool tune = true;
  TuneOptions tuning;
  std::size_t folds = 5;
  std::size_t min_tweets = 10;
  double validation_share = 0.2;
  LoadOptions load;
  // Unless set explicitly, HDBSCAN min_samples follows min_cluster_size.
  bool min_samples_explicit = false;
};

/// The hashed part of the config: everything except file paths.
inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j = narrationdep::to_json(c.train);
  j.erase("seed");
  j.update(narrationdep::to_json(c.clustering));
  j["seed"] = c.seed;
  j["tune"] = c.tune;
  j["tune_budget"] = c.tuning.budget;
  j["tune_epochs"] = c.tuning.epochs;
  j["folds"] = c.folds;
  j["min_tweets"] = c.min_tweets;
  j["validation_share"] = c.validation_share;
  j["max_tokens_per_tweet"] = c.load.q_max;
  j["max_tweets_per_user"] = c.load.l_max;
  return j;
}

inline std::string config_hash(const PipelineConfig& c) { return narrationdep::config_hash(to_json(c)); }

inline void apply_config_json(PipelineConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a flat JSON object");
  static const std::vector<std::string> kTrainKeys = {"lr", "dropout", "epochs", "batch_size", "d_hidden",
                                                      "d_attention", "d_projection", "share_word_encoder",
                                                      "branches", "early_stopping_patience"};
  static const std::vector<std::string> kClusterKeys = {"clusterer", "e_max", "min_cluster_size", "min_samples",
                                                        "metric", "k"};
  nlohmann::json train_part = nlohmann::json::object();
  nlohmann::json cluster_part = narrationdep::to_json(c.clustering);
  if (j.is_object() && j.contains("min_samples")) c.min_samples_explicit = true;
  for (const auto& [key, v] : j.items()) {
    auto is = [&](const std::vector<std::string>& keys) { return std::find(keys.begin(), keys.end(), key) != keys.end(); };
    try {
      if (is(kTrainKeys)) train_part[key] = v;
      else if (is(kClusterKeys)) cluster_part[key] = v;
      else if (key == "data") c.data = v.get<std::string>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "assignments") c.assignments = v.get<std::string>();
      else if (key == "checkpoint") c.checkpoint = v.get<std::string>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "tune") c.tune = v.get<bool>();
      else if (key == "tune_budget") c.tuning.budget = v.get<std::size_t>();
      else if (key == "tune_epochs") c.tuning.epochs = v.get<std::size_t>();
      else if (key == "folds") c.folds = v.get<std::size_t>();
      else if (key == "min_tweets") c.min_tweets = v.get<std::size_t>();
      else if (key == "validation_share") c.validation_share = v.get<double>();
      else if (key == "max_tokens_per_tweet") c.load.q_max = v.get<std::size_t>();
      else if (key == "max_tweets_per_user") c.load.l_max = v.get<std::size_t>();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  if (!c.min_samples_explicit && cluster_part.contains("min_cluster_size"))
    cluster_part["min_samples"] = cluster_part["min_cluster_size"];
  try {
    c.train = train_config_from_json(train_part, c.train);
    c.clustering = clustering_from_json(cluster_part);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline void finalize(PipelineConfig& c) {
  if (!c.min_samples_explicit) c.clustering.hdbscan.min_samples = c.clustering.hdbscan.min_cluster_size;
  c.train.seed = c.seed;
  c.train.e_max = c.clustering.e_max;
  c.train.validate();
  c.clustering.validate();
  if (c.folds < 2) throw ConfigError("folds must be at least 2");
  if (c.tuning.budget < 1) throw ConfigError("tune_budget must be at least 1");
  if (!(c.validation_share > 0 && c.validation_share < 1)) throw ConfigError("validation_share must lie in (0, 1)");
  if (c.load.q_max == 0 || c.load.l_max == 0) throw ConfigError("token and tweet limits must be positive");
}

namespace detail {

inline std::string read_text(const fs::path& p) { return narrationdep::detail::read_file(p); }

inline void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path() && !fs::exists(p.parent_path())) {
    throw IoError("output directory '" + p.parent_path().string() + "' does not exist");
  }
  narrationdep::detail::write_file(p, s);
}

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing --") + what);
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " file not found: '" + path + "'");
}

inline nlohmann::json provenance(const std::string& command, const PipelineConfig& c,
                                 const std::vector<std::string>& inputs) {
  return {{"tool", "narrationdep"},
          {"command", command},
          {"seed", c.seed},
          {"config_hash", config_hash(c)},
          {"config", to_json(c)},
          {"inputs", inputs},
          {"versions",
           {{"narrationdep", NARRATIONDEP_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}}}};
}

// `<artifact>.provenance.json` next to the artifact.
inline void write_provenance(const fs::path& artifact, const std::string& command, const PipelineConfig& c,
                             const std::vector<std::string>& inputs) {
  write_text(artifact.string() + ".provenance.json", provenance(command, c, inputs).dump(2) + "\n");
}

inline nlohmann::json to_json(const Metrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"accuracy", m.accuracy},
          {"degenerate", m.degenerate},
          {"counts", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"fn", m.counts.fn}, {"tn", m.counts.tn}}}};
}

inline nlohmann::json to_json(const Summary& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}, {"min", s.min}, {"max", s.max}};
}

struct Loaded {
  Dataset data;
  std::size_t dropped = 0;
};

inline Loaded load_filtered(const PipelineConfig& c) {
  require_file(c.data, "data");
  Loaded l;
  const auto all = load_jsonl(c.data, c.load);
  l.data = filter_min_tweets(all, c.min_tweets);
  l.dropped = all.users.size() - l.data.users.size();
  if (l.data.users.empty()) {
    throw InputError("no user in '" + c.data + "' has at least " + std::to_string(c.min_tweets) + " tweets");
  }
  return l;
}

inline std::map<std::string, ClusterAssignment> read_assignments(const std::string& path) {
  require_file(path, "assignments");
  std::ifstream in(path);
  std::map<std::string, ClusterAssignment> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClusterAssignment a;
      a.labels = j.at("labels").get<std::vector<int>>();
      a.E = j.at("E").get<std::size_t>();
      out[j.at("user_id").get<std::string>()] = std::move(a);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("assignments '" + path + "' line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline std::uint64_t cluster_seed(std::uint64_t seed) { return derive_seed(seed, "cluster"); }

inline std::vector<ClusterAssignment> assignments_for(const std::vector<UserRecord>& users, const PipelineConfig& c,
                                                      const ClusteringConfig& cc) {
  if (c.assignments.empty()) return cluster_users(users, cc, cluster_seed(c.seed));
  const auto stored = read_assignments(c.assignments);
  std::vector<ClusterAssignment> out;
  for (const auto& u : users) {
    const auto it = stored.find(u.user_id);
    if (it == stored.end()) throw ConsistencyError("assignments file has no entry for user '" + u.user_id + "'");
    validate_assignment(it->second, u.tweets.size());
    out.push_back(it->second);
  }
  return out;
}

// Clustering parameters for a final model: tuned on a seeded holdout of the
// training users when tuning is on and no precomputed assignments are given.
inline ClusteringConfig choose_clustering(const Dataset& d, const PipelineConfig& c) {
  if (!c.tune || !c.assignments.empty() || d.users.size() < 2) return c.clustering;
  std::vector<std::string> ids, fit, val;
  for (const auto& u : d.users) ids.push_back(u.user_id);
  std::sort(ids.begin(), ids.end());
  narrationdep::detail::split_holdout(ids, c.validation_share, derive_seed(c.seed, "holdout"), fit, val);
  return tune_clustering(select_users(d, fit), select_users(d, val), c.clustering, c.train, d.d_w, c.tuning,
                         derive_seed(c.seed, "tune"))
      .best;
}

inline void emit(std::ostream& out, const fs::path& path, const std::string& text) {
  if (path.empty()) out << text;
  else write_text(path, text);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands. Each returns the artifact it wrote (empty when printing).

struct SynthArgs {
  std::size_t users = 200, tweets = 20, d_w = 16, themes = 4;
  double noise = 0.05, depressive_share = 0.6;
  std::string kind = "themed";
};

inline void cmd_synth(const PipelineConfig& c, const SynthArgs& s, std::ostream& out) {
  if (c.out.empty()) throw ConfigError("synth needs --out");
  SynthOptions o;
  o.n_users = s.users;
  o.tweets_per_user = s.tweets;
  o.d_w = s.d_w;
  o.n_themes = s.themes;
  o.noise_sigma = s.noise;
  o.depressive_share = s.depressive_share;
  o.seed = c.seed;
  Dataset d;
  if (s.kind == "themed") d = synth_generate(o);
  else if (s.kind == "narrative") d = synth_narrative(o).data;
  else if (s.kind == "two-signal") d = synth_two_signal(o).data;
  else throw ConfigError("unknown synth kind '" + s.kind + "' (expected themed, narrative or two-signal)");
  std::ostringstream ss;
  write_jsonl(d, ss);
  detail::write_text(c.out, ss.str());
  detail::write_provenance(c.out, "synth", c, {});
  out << nlohmann::json{{"wrote", c.out}, {"users", d.users.size()}, {"d_w", d.d_w}}.dump() << "\n";
}

inline nlohmann::json ingest_stats(const PipelineConfig& c) {
  detail::require_file(c.data, "data");
  const auto d = load_jsonl(c.data, c.load);
  std::size_t tweets = 0, lo = d.users.empty() ? 0 : SIZE_MAX, hi = 0, below = 0;
  std::size_t pos = 0;
  for (const auto& u : d.users) {
    tweets += u.tweets.size();
    lo = std::min(lo, u.tweets.size());
    hi = std::max(hi, u.tweets.size());
    if (u.tweets.size() < c.min_tweets) ++below;
    if (u.label == Label::Depressed) ++pos;
  }
  return {{"format", kEmbeddingFormat},
          {"d_w", d.d_w},
          {"users", d.users.size()},
          {"tweets", tweets},
          {"labels", {{"0", d.users.size() - pos}, {"1", pos}}},
          {"tweets_per_user",
           {{"min", lo},
            {"max", hi},
            {"mean", d.users.empty() ? 0.0 : static_cast<double>(tweets) / static_cast<double>(d.users.size())}}},
          {"below_min_tweets", below},
          {"min_tweets", c.min_tweets},
          {"config_hash", config_hash(c)}};
}

inline void cmd_ingest(const PipelineConfig& c, std::ostream& out) {
  detail::emit(out, c.out, ingest_stats(c).dump(2) + "\n");
  if (!c.out.empty()) detail::write_provenance(c.out, "ingest", c, {c.data});
}

inline void cmd_cluster(const PipelineConfig& c, std::ostream& out) {
  detail::require_file(c.data, "data");
  const auto d = load_jsonl(c.data, c.load);
  const auto as = cluster_users(d.users, c.clustering, detail::cluster_seed(c.seed));
  std::string text;
  for (std::size_t i = 0; i < d.users.size(); ++i) {
    text += nlohmann::json{{"user_id", d.users[i].user_id},
                           {"labels", as[i].labels},
                           {"E", as[i].E},
                           {"params", narrationdep::to_json(c.clustering)}}
                .dump() +
            "\n";
  }
  detail::emit(out, c.out, text);
  if (!c.out.empty()) detail::write_provenance(c.out, "cluster", c, {c.data});
}

inline Checkpoint train_checkpoint(const Dataset& d, const PipelineConfig& c) {
  const auto cc = detail::choose_clustering(d, c);
  const auto as = detail::assignments_for(d.users, c, cc);
  return {train(d.users, as, c.train, d.d_w).params, c.train, cc};
}

inline void cmd_train(const PipelineConfig& c, std::ostream& out) {
  if (c.out.empty()) throw ConfigError("train needs --out (checkpoint manifest path)");
  const auto l = detail::load_filtered(c);
  const auto ck = train_checkpoint(l.data, c);
  save_checkpoint(c.out, ck);
  detail::write_provenance(c.out, "train", c, {c.data});
  out << nlohmann::json{{"wrote", c.out}, {"users", l.data.users.size()}, {"config_hash", narrationdep::config_hash(ck.config_json())}}
             .dump()
      << "\n";
}

inline nlohmann::json evaluate_report(const Dataset& d, std::size_t dropped, const PipelineConfig& c) {
  CvConfig cv;
  cv.train = c.train;
  cv.clustering = c.clustering;
  cv.tune = c.tune;
  cv.tuning = c.tuning;
  cv.validation_share = c.validation_share;
  cv.folds = c.folds;
  cv.min_tweets = c.min_tweets;
  cv.seed = c.seed;
  const auto r = cross_validate(d, cv);
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"metrics", detail::to_json(f.metrics)},
                     {"clustering", narrationdep::to_json(f.clustering)},
                     {"test_ids", f.test_ids},
                     {"final_epoch_loss", f.epoch_loss.empty() ? 0.0 : f.epoch_loss.back()}});
  }
  return {{"users", d.users.size()},
          {"users_dropped", dropped},
          {"folds", folds},
          {"summary",
           {{"precision", detail::to_json(r.precision)},
            {"recall", detail::to_json(r.recall)},
            {"f1", detail::to_json(r.f1)},
            {"accuracy", detail::to_json(r.accuracy)}}},
          {"config_hash", config_hash(c)}};
}

inline void cmd_evaluate(const PipelineConfig& c, std::ostream& out) {
  const auto l = detail::load_filtered(c);
  std::optional<Checkpoint> ck;
  if (!c.checkpoint.empty()) {
    detail::require_file(c.checkpoint, "checkpoint");
    ck = load_checkpoint(c.checkpoint);
    const ModelDims want = c.train.dims(l.data.d_w);
    if (!(ck->params.dims == want)) {
      throw ConsistencyError("checkpoint '" + c.checkpoint + "' dims " + to_json(ck->params.dims).dump() +
                             " disagree with the config " + to_json(want).dump());
    }
  }
  auto report = evaluate_report(l.data, l.dropped, c);
  if (ck) {
    const auto as = cluster_users(l.data.users, ck->clustering, detail::cluster_seed(ck->train.seed));
    std::vector<int> labels;
    for (const auto& u : l.data.users) labels.push_back(to_int(u.label));
    const auto m = prf1_accuracy(confusion(threshold(predict(l.data.users, as, ck->params, ck->train.branches)), labels));
    report["checkpoint"] = {{"path", c.checkpoint},
                            {"config_hash", narrationdep::config_hash(ck->config_json())},
                            {"metrics", detail::to_json(m)}};
  }
  detail::emit(out, c.out, report.dump(2) + "\n");
  if (!c.out.empty()) {
    std::vector<std::string> inputs{c.data};
    if (ck) inputs.push_back(c.checkpoint);
    detail::write_provenance(c.out, "evaluate", c, inputs);
  }
}

struct ExplainArgs {
  std::string user_id;
  std::string granularity = "hour";
  std::string format = "json";
  std::int64_t utc_offset = 0;
};

inline NarrativeReport explain_one(const Dataset& d, const PipelineConfig& c, const Checkpoint& ck,
                                   const std::string& user_id, std::int64_t offset) {
  const auto it = std::find_if(d.users.begin(), d.users.end(), [&](const UserRecord& u) { return u.user_id == user_id; });
  if (it == d.users.end()) throw InputError("user '" + user_id + "' not found in '" + c.data + "'");
  if (ck.params.dims.d_w != d.d_w) {
    throw ConsistencyError("checkpoint expects d_w=" + std::to_string(ck.params.dims.d_w) + ", data has " +
                           std::to_string(d.d_w));
  }
  ClusterAssignment a;
  if (c.assignments.empty()) {
    a = cluster_user(*it, ck.clustering, detail::cluster_seed(ck.train.seed));
  } else {
    a = detail::assignments_for({*it}, c, ck.clustering).front();
  }
  return explain_user(*it, a, ck.params, offset);
}

inline void write_explain(const NarrativeReport& r, const PipelineConfig& c, const ExplainArgs& e,
                          std::ostream& out) {
  const auto g = granularity_from_string(e.granularity);
  const auto f = report_format_from_string(e.format);
  if (f == ReportFormat::Json) {
    auto j = to_json(r);
    j["granularity"] = to_string(g);
    j["profile"] = g == Granularity::Weekday ? r.weekday : r.hour;
    detail::emit(out, c.out, j.dump(2) + "\n");
  } else {
    detail::emit(out, c.out, report_csv(r));
    if (!c.out.empty()) detail::write_text(fs::path(c.out).replace_extension("." + to_string(g) + ".csv"), profile_csv(r, g));
    else out << "\n" << profile_csv(r, g);
  }
  if (!c.out.empty()) detail::write_provenance(c.out, "explain", c, {c.data, c.checkpoint});
}

inline void cmd_explain(const PipelineConfig& c, const ExplainArgs& e, std::ostream& out) {
  detail::require_file(c.data, "data");
  detail::require_file(c.checkpoint, "checkpoint");
  if (e.user_id.empty()) throw ConfigError("explain needs --user-id");
  granularity_from_string(e.granularity);
  report_format_from_string(e.format);
  const auto d = load_jsonl(c.data, c.load);
  const auto ck = load_checkpoint(c.checkpoint);
  write_explain(explain_one(d, c, ck, e.user_id, e.utc_offset), c, e, out);
}

/// ingest -> cluster -> train -> evaluate -> explain into one directory.
/// Without --data a themed synthetic set is generated first.
inline void cmd_pipeline(PipelineConfig c, const SynthArgs& s, std::ostream& out) {
  const fs::path dir = c.out.empty() ? fs::path("narrationdep-out") : fs::path(c.out);
  fs::create_directories(dir);
  if (c.data.empty()) {
    PipelineConfig sc = c;
    sc.out = (dir / "data.jsonl").string();
    std::ostringstream sink;
    cmd_synth(sc, s, sink);
    c.data = sc.out;
  }
  auto stage = [&](const std::string& name) {
    PipelineConfig sc = c;
    sc.out = (dir / name).string();
    return sc;
  };
  std::ostringstream sink;
  cmd_ingest(stage("ingest.json"), sink);

  const auto l = detail::load_filtered(c);
  const auto cc = detail::choose_clustering(l.data, c);
  auto cluster_cfg = stage("assignments.jsonl");
  cluster_cfg.clustering = cc;
  cmd_cluster(cluster_cfg, sink);

  auto train_cfg = stage("model.json");
  train_cfg.assignments = cluster_cfg.out;
  train_cfg.tune = false;
  train_cfg.clustering = cc;
  const auto ck = train_checkpoint(l.data, train_cfg);
  save_checkpoint(train_cfg.out, ck);
  detail::write_provenance(train_cfg.out, "train", train_cfg, {c.data, cluster_cfg.out});

  auto eval_cfg = stage("metrics.json");
  const auto report = evaluate_report(l.data, l.dropped, eval_cfg);
  detail::write_text(eval_cfg.out, report.dump(2) + "\n");
  detail::write_provenance(eval_cfg.out, "evaluate", eval_cfg, {c.data});

  const auto pick = std::find_if(l.data.users.begin(), l.data.users.end(),
                                 [](const UserRecord& u) { return u.label == Label::Depressed; });
  const auto& who = pick == l.data.users.end() ? l.data.users.front() : *pick;
  auto explain_cfg = stage("explain.json");
  explain_cfg.checkpoint = train_cfg.out;
  ExplainArgs e;
  e.user_id = who.user_id;
  write_explain(explain_one(l.data, explain_cfg, ck, who.user_id, 0), explain_cfg, e, sink);

  out << nlohmann::json{{"out", dir.string()},
                        {"users", l.data.users.size()},
                        {"f1", report["summary"]["f1"]["mean"]},
                        {"accuracy", report["summary"]["accuracy"]["mean"]},
                        {"config_hash", config_hash(c)}}
             .dump()
      << "\n";
}

// ---------------------------------------------------------------------------

inline void report_error(std::ostream& err, int code, const std::string& kind, const std::string& message) {
  err << nlohmann::json{{"status", "error"}, {"exit", code}, {"kind", kind}, {"message", message}}.dump() << "\n";
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depression detection from tweet narratives", "narrationdep"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(NARRATIONDEP_VERSION));

  std::vector<std::function<void(PipelineConfig&)>> overrides;
  std::string config_path;
  SynthArgs synth_args;
  ExplainArgs explain_args;

  auto set = [&overrides](auto member) {
    return [&overrides, member](const auto& v) { overrides.push_back([=](PipelineConfig& c) { member(c, v); }); };
  };

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Flat JSON config file");
    sub->add_option_function<std::string>("--data", set([](PipelineConfig& c, const std::string& v) { c.data = v; }),
                                          "Embedding JSONL file");
    sub->add_option_function<std::string>("--out", set([](PipelineConfig& c, const std::string& v) { c.out = v; }),
                                          "Output path");
    sub->add_option_function<std::uint64_t>("--seed", set([](PipelineConfig& c, std::uint64_t v) { c.seed = v; }),
                                            "Top-level random seed");
    sub->add_option_function<std::size_t>(
        "--epochs", set([](PipelineConfig& c, std::size_t v) { c.train.epochs = v; }), "Training epochs");
    sub->add_option_function<double>("--lr", set([](PipelineConfig& c, double v) { c.train.lr = v; }),
                                     "Adam learning rate");
    sub->add_option_function<double>("--dropout", set([](PipelineConfig& c, double v) { c.train.dropout = v; }),
                                     "Dropout rate on the fused vector");
    sub->add_option_function<std::size_t>("--d-hidden", set([](PipelineConfig& c, std::size_t v) { c.train.d_h = v; }),
                                          "GRU hidden width per direction");
    sub->add_option_function<std::size_t>(
        "--e-max", set([](PipelineConfig& c, std::size_t v) { c.clustering.e_max = v; }), "Cluster cap per user");
    sub->add_option_function<std::string>(
           "--clusterer", set([](PipelineConfig& c, const std::string& v) { c.clustering.kind = clusterer_from_string(v); }),
           "hdbscan or kmeans")
        ->check(CLI::IsMember({"hdbscan", "kmeans"}));
    sub->add_option_function<std::size_t>(
        "--min-cluster-size", set([](PipelineConfig& c, std::size_t v) { c.clustering.hdbscan.min_cluster_size = v; }),
        "HDBSCAN min_cluster_size");
    sub->add_option_function<std::size_t>(
        "--min-samples", set([](PipelineConfig& c, std::size_t v) {
          c.clustering.hdbscan.min_samples = v;
          c.min_samples_explicit = true;
        }),
        "HDBSCAN min_samples");
    sub->add_option_function<std::string>(
           "--metric",
           set([](PipelineConfig& c, const std::string& v) { c.clustering.hdbscan.metric = metric_from_string(v); }),
           "euclidean or cosine")
        ->check(CLI::IsMember({"euclidean", "cosine"}));
    sub->add_option_function<int>("--k", set([](PipelineConfig& c, int v) { c.clustering.k = v; }), "k-means k");
    sub->add_option_function<std::size_t>("--min-tweets",
                                          set([](PipelineConfig& c, std::size_t v) { c.min_tweets = v; }),
                                          "Drop users with fewer tweets");
  };
  auto add_tuning = [&](CLI::App* sub) {
    sub->add_flag_function("--no-tune", set([](PipelineConfig& c, std::int64_t) { c.tune = false; }),
                           "Use the given clustering parameters as they are");
    sub->add_option_function<std::size_t>(
        "--tune-budget", set([](PipelineConfig& c, std::size_t v) { c.tuning.budget = v; }), "Search trials");
  };
  auto add_synth = [&](CLI::App* sub) {
    sub->add_option("--users", synth_args.users, "Number of users");
    sub->add_option("--tweets", synth_args.tweets, "Tweets per user");
    sub->add_option("--d-w", synth_args.d_w, "Token vector width");
    sub->add_option("--themes", synth_args.themes, "Number of themes");
    sub->add_option("--noise", synth_args.noise, "Token noise sigma");
    sub->add_option("--depressive-share", synth_args.depressive_share, "Depressive-theme share of positive users");
    sub->add_option("--kind", synth_args.kind, "themed, narrative or two-signal")
        ->check(CLI::IsMember({"themed", "narrative", "two-signal"}));
  };
  auto add_assignments = [&](CLI::App* sub) {
    sub->add_option_function<std::string>(
        "--assignments", set([](PipelineConfig& c, const std::string& v) { c.assignments = v; }),
        "Precomputed cluster assignments (JSONL from the cluster command)");
  };
  auto add_checkpoint = [&](CLI::App* sub) {
    sub->add_option_function<std::string>(
        "--checkpoint", set([](PipelineConfig& c, const std::string& v) { c.checkpoint = v; }), "Checkpoint manifest");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic embedding dataset");
  add_common(synth);
  add_synth(synth);
  auto* ingest = app.add_subcommand("ingest", "Validate a dataset and print statistics");
  add_common(ingest);
  auto* cluster = app.add_subcommand("cluster", "Cluster every user's tweets");
  add_common(cluster);
  auto* trn = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(trn);
  add_tuning(trn);
  add_assignments(trn);
  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validation report");
  add_common(evaluate);
  add_tuning(evaluate);
  add_checkpoint(evaluate);
  evaluate->add_option_function<std::size_t>("--folds", set([](PipelineConfig& c, std::size_t v) { c.folds = v; }),
                                             "Number of folds");
  auto* explain = app.add_subcommand("explain", "Narrative report for one user");
  add_common(explain);
  add_checkpoint(explain);
  add_assignments(explain);
  explain->add_option("--user-id", explain_args.user_id, "User to explain")->required();
  explain->add_option("--granularity", explain_args.granularity, "weekday or hour")
      ->check(CLI::IsMember({"weekday", "hour"}));
  explain->add_option("--format", explain_args.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  explain->add_option("--utc-offset", explain_args.utc_offset, "Fixed offset in seconds for time buckets");
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage into one output directory");
  add_common(pipeline);
  add_tuning(pipeline);
  add_synth(pipeline);
  pipeline->add_option_function<std::size_t>("--folds", set([](PipelineConfig& c, std::size_t v) { c.folds = v; }),
                                             "Number of folds");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << NARRATIONDEP_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    report_error(err, kExitUsage, "usage", e.what());
    return kExitUsage;
  }

  try {
    PipelineConfig c;
    if (!config_path.empty()) {
      detail::require_file(config_path, "config");
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(detail::read_text(config_path));
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + config_path + "': " + e.what());
      }
      apply_config_json(c, j);
    }
    for (const auto& o : overrides) o(c);
    finalize(c);

    if (synth->parsed()) cmd_synth(c, synth_args, out);
    else if (ingest->parsed()) cmd_ingest(c, out);
    else if (cluster->parsed()) cmd_cluster(c, out);
    else if (trn->parsed()) cmd_train(c, out);
    else if (evaluate->parsed()) cmd_evaluate(c, out);
    else if (explain->parsed()) cmd_explain(c, explain_args, out);
    else if (pipeline->parsed()) cmd_pipeline(c, synth_args, out);
    return kExitOk;
  } catch (const Error& e) {
    const int code = exit_code_for(e);
    report_error(err, code, e.kind(), e.what());
    return code;
  } catch (const fs::filesystem_error& e) {
    report_error(err, kExitData, "io", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    report_error(err, kExitData, "internal", e.what());
    return kExitData;
  }
}

}  // namespace narrationdep::cli
