#include <catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "narrationdep/cluster/embed.hpp"
#include "narrationdep/data/jsonl.hpp"
#include "narrationdep/data/preprocess.hpp"
#include "narrationdep/data/synth.hpp"
#include "test_support.hpp"

using namespace narrationdep;
using namespace testing_support;

namespace {

Dataset make_dataset(const std::vector<std::size_t>& tweet_counts, std::size_t d_w, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.d_w = d_w;
  for (std::size_t i = 0; i < tweet_counts.size(); ++i)
    d.users.push_back(random_user(tweet_counts[i], 3, d_w, rng, "u" + std::to_string(i)));
  return d;
}

std::string tweet_json(std::size_t d_w, const std::string& ts = "2016-12-01T07:15:00Z") {
  std::string v = "[";
  for (std::size_t k = 0; k < d_w; ++k) v += (k ? ",0." : "0.") + std::to_string(k + 1);
  return R"({"ts":")" + ts + R"(","tokens":[)" + v + "]]}";
}

}  // namespace

TEST_CASE("load_jsonl on an empty file", "[data][jsonl]") {
  std::istringstream in("");
  const auto d = load_jsonl(in);
  CHECK(d.users.empty());
  CHECK(d.d_w == 0);
}

TEST_CASE("load_jsonl reads a small fixture exactly", "[data][jsonl]") {
  std::istringstream in(
      R"({"format":"narrationdep-emb/1","d_w":4})"
      "\n"
      R"({"user_id":"alice","label":1,"tweets":[{"ts":"2016-12-01T07:15:00Z","tokens":[[0.5,-1,2,0.25]],"text":"hi"},)"
      R"({"ts":"2016-12-02T14:00:00+01:00","tokens":[[1,2,3,4],[5,6,7,8]]}]})"
      "\n");
  const auto d = load_jsonl(in);
  REQUIRE(d.users.size() == 1);
  CHECK(d.d_w == 4);
  const auto& u = d.users[0];
  CHECK(u.user_id == "alice");
  CHECK(u.label == Label::Depressed);
  REQUIRE(u.tweets.size() == 2);
  CHECK(u.tweets[0].tokens.values() == Vec{0.5, -1, 2, 0.25});
  CHECK(u.tweets[0].raw_text == std::optional<std::string>("hi"));
  CHECK(u.tweets[0].timestamp == 1480576500);
  CHECK(u.tweets[1].timestamp == 1480683600);
  CHECK(u.tweets[1].tokens.shape() == Shape{2, 4});
  CHECK_FALSE(u.tweets[1].raw_text.has_value());
}

TEST_CASE("load_jsonl names the line of a dimension change", "[data][jsonl]") {
  std::istringstream in(R"({"user_id":"a","label":0,"tweets":[)" + tweet_json(4) + "]}\n" +
                        R"({"user_id":"b","label":1,"tweets":[)" + tweet_json(4) + "]}\n" +
                        R"({"user_id":"c","label":0,"tweets":[)" + tweet_json(5) + "]}\n");
  try {
    load_jsonl(in);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("line 3"));
  }
}

TEST_CASE("load_jsonl rejects malformed records with their line number", "[data][jsonl]") {
  const std::vector<std::pair<std::string, std::string>> bad{
      {"{not json", "line 1"},
      {R"({"user_id":"a","label":2,"tweets":[)" + tweet_json(2) + "]}", "label"},
      {R"({"user_id":"a","label":0,"tweets":[]})", "no tweets"},
      {R"({"user_id":"a","label":0,"tweets":[{"ts":"yesterday","tokens":[[1]]}]})", "timestamp"},
      {R"({"user_id":"a","label":0,"tweets":[{"ts":"2016-12-01T07:15:00Z","tokens":[]}]})", "tokens"},
      {R"({"format":"other/1","d_w":3})", "format"},
  };
  for (const auto& [text, needle] : bad) {
    std::istringstream in(text + "\n");
    try {
      load_jsonl(in);
      FAIL("accepted: " << text);
    } catch (const Error& e) {
      INFO(text);
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring(needle));
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("line 1"));
    }
  }
  std::istringstream dup(R"({"user_id":"a","label":0,"tweets":[)" + tweet_json(2) + "]}\n" +
                         R"({"user_id":"a","label":1,"tweets":[)" + tweet_json(2) + "]}\n");
  CHECK_THROWS_AS(load_jsonl(dup), SchemaError);
  CHECK_THROWS_AS(load_jsonl(std::string("/nonexistent/dir/file.jsonl")), IoError);
}

TEST_CASE("load_jsonl truncates tokens from the tail and keeps the most recent tweets", "[data][jsonl]") {
  std::string tweets;
  for (int k = 0; k < 5; ++k) {
    if (k) tweets += ",";
    tweets += R"({"ts":"2016-12-0)" + std::to_string(k + 1) + R"(T00:00:00Z","tokens":[[1],[2],[3]]})";
  }
  std::istringstream in(R"({"user_id":"a","label":0,"tweets":[)" + tweets + "]}\n");
  LoadOptions opt;
  opt.q_max = 2;
  opt.l_max = 3;
  const auto d = load_jsonl(in, opt);
  REQUIRE(d.users[0].tweets.size() == 3);
  CHECK(format_utc(d.users[0].tweets[0].timestamp) == "2016-12-03T00:00:00Z");
  CHECK(d.users[0].tweets[0].tokens.values() == Vec{1, 2});
}

TEST_CASE("write_jsonl then load_jsonl is the identity", "[data][jsonl][property]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto d = make_dataset({3, 1, 5}, 1 + seed % 6, seed);
    d.users[0].tweets[0].raw_text = "caf\xc3\xa9 \"quoted\"\n";
    d.users[1].label = Label::Depressed;
    std::stringstream io;
    write_jsonl(d, io);
    REQUIRE(load_jsonl(io) == d);
  }
}

TEST_CASE("filter_min_tweets", "[data][preprocess]") {
  const auto d = make_dataset({9, 10, 12}, 2, 0);
  const auto f = filter_min_tweets(d);
  REQUIRE(f.users.size() == 2);
  CHECK(f.users[0].user_id == "u1");
  CHECK(f.users[1].user_id == "u2");
  CHECK(filter_min_tweets(f) == f);
  CHECK(filter_min_tweets(d, 1) == d);
  const auto big = make_dataset({10, 11, 30}, 2, 1);
  CHECK(filter_min_tweets(big) == big);
}

TEST_CASE("kfold_split is a seeded partition", "[data][preprocess]") {
  const auto d10 = make_dataset(std::vector<std::size_t>(10, 1), 2, 0);
  const auto folds = kfold_split(d10, 5, 3);
  REQUIRE(folds.size() == 5);
  for (const auto& f : folds) CHECK(f.test_ids.size() == 2);

  for (std::size_t n = 5; n <= 23; ++n) {
    const auto d = make_dataset(std::vector<std::size_t>(n, 1), 2, n);
    const auto fs = kfold_split(d, 5, n);
    std::multiset<std::string> seen;
    std::size_t lo = n, hi = 0;
    for (const auto& f : fs) {
      seen.insert(f.test_ids.begin(), f.test_ids.end());
      lo = std::min(lo, f.test_ids.size());
      hi = std::max(hi, f.test_ids.size());
      std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
      REQUIRE(train.size() + f.test_ids.size() == n);
      for (const auto& id : f.test_ids) REQUIRE(train.count(id) == 0);
    }
    REQUIRE(seen.size() == n);
    REQUIRE(std::set<std::string>(seen.begin(), seen.end()).size() == n);
    REQUIRE(hi - lo <= 1);
  }

  CHECK(kfold_split(d10, 5, 3)[2].test_ids == folds[2].test_ids);
  auto shuffled = d10;
  std::reverse(shuffled.users.begin(), shuffled.users.end());
  CHECK(kfold_split(shuffled, 5, 3)[4].test_ids == folds[4].test_ids);
  CHECK_THROWS_AS(kfold_split(make_dataset({1, 1, 1}, 2, 0), 5, 0), ConfigError);
  CHECK_THROWS_AS(kfold_split(d10, 1, 0), ConfigError);
}

TEST_CASE("synth_generate properties", "[data][synth]") {
  SynthOptions o;
  o.noise_sigma = 0;
  o.n_users = 12;
  const auto exact = synth_generate_with_truth(o);
  for (std::size_t i = 0; i < exact.data.users.size(); ++i)
    for (std::size_t t = 0; t < exact.data.users[i].tweets.size(); ++t) {
      const auto& tok = exact.data.users[i].tweets[t].tokens;
      for (std::size_t q = 0; q < tok.rows(); ++q)
        REQUIRE(Vec(tok.row(q).begin(), tok.row(q).end()) == exact.centers[exact.themes[i][t]]);
    }

  const auto d = synth_generate(SynthOptions{});
  std::size_t pos = 0;
  for (const auto& u : d.users) {
    pos += u.label == Label::Depressed;
    REQUIRE(u.tweets.size() == 20);
    REQUIRE(u.tweets[0].dim() == 16);
    for (std::size_t t = 1; t < u.tweets.size(); ++t) REQUIRE(u.tweets[t - 1].timestamp <= u.tweets[t].timestamp);
  }
  CHECK(d.users.size() == 200);
  CHECK(pos >= 99);
  CHECK(pos <= 101);
  CHECK(synth_generate(SynthOptions{}) == d);
  SynthOptions bad;
  bad.n_themes = 1;
  CHECK_THROWS_AS(synth_generate(bad), ConfigError);
}

TEST_CASE("synth_generate is separable by a nearest-center classifier", "[data][synth]") {
  const auto truth = synth_generate_with_truth(SynthOptions{});
  // Class centers of the per-user mean embedding, fit on even-indexed users
  // and scored on the rest.
  std::vector<Vec> sum(2, Vec(16, 0));
  std::vector<double> count(2, 0);
  std::vector<Vec> means;
  for (const auto& u : truth.data.users) {
    Vec m(16, 0);
    for (const auto& t : u.tweets) {
      const auto e = sentence_embed(t);
      for (std::size_t k = 0; k < 16; ++k) m[k] += e[k] / static_cast<double>(u.tweets.size());
    }
    means.push_back(m);
  }
  for (std::size_t i = 0; i < means.size(); i += 4) {
    for (std::size_t j = i; j < std::min(i + 2, means.size()); ++j) {
      const int y = to_int(truth.data.users[j].label);
      for (std::size_t k = 0; k < 16; ++k) sum[y][k] += means[j][k];
      ++count[y];
    }
  }
  std::size_t correct = 0, scored = 0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (i % 4 < 2) continue;
    double d0 = 0, d1 = 0;
    for (std::size_t k = 0; k < 16; ++k) {
      d0 += std::pow(means[i][k] - sum[0][k] / count[0], 2);
      d1 += std::pow(means[i][k] - sum[1][k] / count[1], 2);
    }
    correct += (d1 < d0 ? 1 : 0) == to_int(truth.data.users[i].label);
    ++scored;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(scored) >= 0.99);
}

TEST_CASE("synth_two_signal layout", "[data][synth]") {
  SynthOptions o;
  o.n_users = 8;
  const auto r = synth_two_signal(o);
  const int cue = 3;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& th = r.themes[i];
    const bool order_route = i % 2 == 1 && (i / 2) % 2 == 0;
    CHECK((th.back() == cue) == order_route);
    CHECK(std::count(th.begin(), th.end(), cue) == 5);
    const auto dep = std::count(th.begin(), th.end(), 0);
    CHECK((dep == 12) == (i % 2 == 1 && !order_route));
  }
}

TEST_CASE("synth_narrative thread counts", "[data][synth]") {
  SynthOptions o;
  o.n_users = 40;
  o.n_themes = 12;
  const auto r = synth_narrative(o);
  for (std::size_t i = 0; i < o.n_users; ++i) {
    std::vector<int> count(12, 0);
    for (int t : r.themes[i]) ++count[static_cast<std::size_t>(t)];
    std::vector<int> big;
    for (int c : count)
      if (c > 2) big.push_back(c);
    std::sort(big.begin(), big.end());
    REQUIRE(r.themes[i].size() == 20);
    if (i % 2 == 1) CHECK(big == std::vector<int>{6, 8});
    else CHECK(big == std::vector<int>{6});
  }
  o.n_themes = 4;
  CHECK_THROWS_AS(synth_narrative(o), ConfigError);
  o.n_themes = 12;
  CHECK_THROWS_AS(synth_narrative(o, {12, 12, 2}), ConfigError);
}

TEST_CASE("timestamp parsing and calendar helpers", "[data][time]") {
  CHECK(parse_utc("1970-01-01T00:00:00Z") == 0);
  CHECK(parse_utc("2016-12-01T07:15:00Z") == 1480576500);
  CHECK(parse_utc("2016-12-01T07:15:00.750Z") == 1480576500);
  CHECK(parse_utc("2016-12-01T09:15:00+02:00") == 1480576500);
  CHECK(parse_utc("1969-12-31T23:59:59Z") == -1);
  CHECK(format_utc(-1) == "1969-12-31T23:59:59Z");
  CHECK(format_utc(parse_utc("2024-02-29T12:00:00Z")) == "2024-02-29T12:00:00Z");
  CHECK_THROWS_AS(parse_utc("2016-13-01T00:00:00Z"), ParseError);
  CHECK_THROWS_AS(parse_utc("2016-12-01 07:15"), ParseError);
  // 2016-12-05 was a Monday.
  CHECK(weekday_monday_first(parse_utc("2016-12-05T00:00:00Z")) == 0);
  CHECK(weekday_monday_first(parse_utc("2016-12-04T23:59:59Z")) == 6);
  CHECK(weekday_monday_first(parse_utc("2016-12-04T23:00:00Z"), 3600) == 0);
  CHECK(hour_of_day(parse_utc("2016-12-01T07:15:00Z")) == 7);
  CHECK(hour_of_day(parse_utc("2016-12-01T07:15:00Z"), -8 * 3600) == 23);
  Rng rng(0);
  for (int k = 0; k < 1000; ++k) {
    const auto t = rng.uniform_int(-4'000'000'000, 4'000'000'000);
    REQUIRE(parse_utc(format_utc(t)) == t);
  }
}
