#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "narrationdep/cli/app.hpp"

using namespace narrationdep;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("narrationdep_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The diagnostic stream carries exactly one JSON line.
nlohmann::json diagnostic(const Result& r) {
  REQUIRE(!r.err.empty());
  REQUIRE(r.err.back() == '\n');
  REQUIRE(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  return nlohmann::json::parse(r.err);
}

std::string small_dataset(const fs::path& dir, std::size_t users = 40) {
  const auto path = (dir / "data.jsonl").string();
  const auto r = run_cli({"synth", "--out", path, "--users", std::to_string(users), "--seed", "5"});
  REQUIRE(r.code == 0);
  return path;
}

}  // namespace

TEST_CASE("missing data path exits 2 and names the path", "[cli]") {
  for (const char* cmd : {"ingest", "cluster", "train", "evaluate"}) {
    const auto r = run_cli({cmd, "--data", "/nonexistent/tweets.jsonl", "--out", "/tmp/x.json"});
    CHECK(r.code == 2);
    const auto j = diagnostic(r);
    CHECK(j["exit"] == 2);
    CHECK(j["message"].get<std::string>().find("/nonexistent/tweets.jsonl") != std::string::npos);
  }
}

TEST_CASE("usage errors exit 1", "[cli]") {
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({"train", "--epochs", "many"}).code == 1);
  CHECK(run_cli({"train", "--clusterer", "dbscan"}).code == 1);
  auto r = run_cli({"train", "--data", "x", "--dropout", "1.0"});
  CHECK(r.code == 1);
  CHECK(diagnostic(r)["kind"] == "config");
  CHECK(run_cli({"explain", "--data", "x"}).code == 1);  // --user-id is required
  r = run_cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("pipeline") != std::string::npos);
}

TEST_CASE("malformed data exits 2", "[cli]") {
  const auto dir = scratch("bad");
  std::ofstream(dir / "bad.jsonl") << "{\"format\":\"narrationdep-emb/1\",\"d_w\":2}\n{\"user_id\": 3}\n";
  const auto r = run_cli({"ingest", "--data", (dir / "bad.jsonl").string()});
  CHECK(r.code == 2);
  CHECK(diagnostic(r)["message"].get<std::string>().find("line 2") != std::string::npos);
}

TEST_CASE("numerical failure exits 3", "[cli]") {
  const auto dir = scratch("nan");
  const auto data = small_dataset(dir, 20);
  const auto r = run_cli({"train", "--data", data, "--out", (dir / "m.json").string(), "--lr", "1e308", "--no-tune",
                          "--epochs", "5"});
  CHECK(r.code == 3);
  CHECK(diagnostic(r)["kind"] == "numerical");
}

TEST_CASE("train twice with the same seed gives identical checkpoint bytes", "[cli]") {
  const auto dir = scratch("det");
  const auto data = small_dataset(dir);
  const auto ckpt = (dir / "model.json").string();
  std::vector<std::string> args{"train", "--data", data, "--out", ckpt, "--epochs", "4", "--seed", "9", "--tune-budget", "2"};
  REQUIRE(run_cli(args).code == 0);
  const auto manifest = slurp(ckpt), blob = slurp(dir / "model.bin");
  REQUIRE(run_cli(args).code == 0);
  CHECK(slurp(ckpt) == manifest);
  CHECK(slurp(dir / "model.bin") == blob);
  const auto prov = nlohmann::json::parse(slurp(ckpt + ".provenance.json"));
  CHECK(prov["seed"] == 9);
  CHECK(prov["config"]["epochs"] == 4);
  CHECK(prov["versions"]["narrationdep"].is_string());
  CHECK(prov["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("flags override the config file, which overrides defaults", "[cli]") {
  const auto dir = scratch("prec");
  const auto data = small_dataset(dir, 20);
  std::ofstream(dir / "cfg.json") << R"({"epochs": 2, "lr": 0.005, "min_cluster_size": 3, "tune": false, "data": ")"
                                  << data << "\"}";
  const auto out = (dir / "m.json").string();
  REQUIRE(run_cli({"train", "--config", (dir / "cfg.json").string(), "--out", out, "--epochs", "3"}).code == 0);
  const auto cfg = nlohmann::json::parse(slurp(out + ".provenance.json"))["config"];
  CHECK(cfg["epochs"] == 3);           // flag
  CHECK(cfg["lr"] == 0.005);           // file
  CHECK(cfg["min_cluster_size"] == 3);  // file
  CHECK(cfg["dropout"] == 0.5);        // default
  const auto ck = load_checkpoint(out);
  CHECK(ck.train.epochs == 3);
  CHECK(ck.clustering.hdbscan.min_cluster_size == 3);

  std::ofstream(dir / "typo.json") << R"({"epoch": 2})";
  const auto r = run_cli({"train", "--config", (dir / "typo.json").string(), "--data", data, "--out", out});
  CHECK(r.code == 1);
  CHECK(diagnostic(r)["message"].get<std::string>().find("epoch") != std::string::npos);
}

TEST_CASE("cluster, explain and evaluate artifacts", "[cli]") {
  const auto dir = scratch("art");
  const auto data = small_dataset(dir);
  const auto asg = (dir / "a.jsonl").string();
  REQUIRE(run_cli({"cluster", "--data", data, "--out", asg, "--min-cluster-size", "4"}).code == 0);
  std::ifstream in(asg);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["labels"].size() == 20);
    CHECK(j["E"].get<std::size_t>() >= 1);
    CHECK(j["params"]["min_cluster_size"] == 4);
    CHECK(j.contains("user_id"));
    ++lines;
  }
  CHECK(lines == 40);

  const auto ckpt = (dir / "m.json").string();
  REQUIRE(run_cli({"train", "--data", data, "--assignments", asg, "--out", ckpt, "--epochs", "3"}).code == 0);

  auto r = run_cli({"explain", "--data", data, "--checkpoint", ckpt, "--user-id", "user-0003", "--format", "csv",
                    "--granularity", "weekday", "--out", (dir / "e.csv").string()});
  REQUIRE(r.code == 0);
  const auto csv = slurp(dir / "e.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
  CHECK(slurp(dir / "e.weekday.csv").rfind("weekday,weight\nMon,", 0) == 0);

  r = run_cli({"explain", "--data", data, "--checkpoint", ckpt, "--user-id", "user-0003"});
  REQUIRE(r.code == 0);
  const auto rep = report_from_json(nlohmann::json::parse(r.out));
  CHECK(rep.user_id == "user-0003");
  CHECK(std::accumulate(rep.salience.begin(), rep.salience.end(), 0.0) == Catch::Approx(1.0).margin(1e-9));

  r = run_cli({"explain", "--data", data, "--checkpoint", ckpt, "--user-id", "nobody"});
  CHECK(r.code == 2);
  CHECK(diagnostic(r)["message"].get<std::string>().find("nobody") != std::string::npos);

  r = run_cli({"evaluate", "--data", data, "--checkpoint", ckpt, "--d-hidden", "4", "--no-tune"});
  CHECK(r.code == 2);
  CHECK(diagnostic(r)["kind"] == "consistency");

  r = run_cli({"evaluate", "--data", data, "--checkpoint", ckpt, "--no-tune", "--epochs", "3", "--folds", "4"});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(r.out);
  CHECK(report["folds"].size() == 4);
  CHECK(report["checkpoint"]["metrics"].contains("f1"));
  CHECK(report["summary"]["f1"].contains("stddev"));
}

TEST_CASE("pipeline on synthetic data reaches F1 0.95", "[cli][slow]") {
  const auto dir = scratch("pipe");
  const auto r = run_cli({"pipeline", "--out", dir.string(), "--seed", "0"});
  REQUIRE(r.code == 0);
  const auto summary = nlohmann::json::parse(r.out);
  CHECK(summary["f1"].get<double>() >= 0.95);
  const auto metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
  CHECK(metrics["summary"]["f1"]["mean"].get<double>() >= 0.95);
  for (const char* f : {"data.jsonl", "ingest.json", "assignments.jsonl", "model.json", "model.bin", "metrics.json",
                        "explain.json"}) {
    CHECK(fs::exists(dir / f));
  }
  for (const char* f : {"data.jsonl", "ingest.json", "assignments.jsonl", "model.json", "metrics.json", "explain.json"})
    CHECK(fs::exists(dir / (std::string(f) + ".provenance.json")));
}
