// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "geosoc/cli/app.hpp"
#include "geosoc/constant_optimizer.hpp"
#include "geosoc/pipeline.hpp"
#include "geosoc/query.hpp"
#include "geosoc/rank_classifier.hpp"
#include "geosoc/snapshot.hpp"
#include "test_support.hpp"

using namespace geosoc;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Collects failure messages for one criterion.
class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::string s;
    for (const auto& f : failures_) s += "\n      - " + f;
    if (failed_ > failures_.size()) s += "\n      ... " + std::to_string(failed_ - failures_.size()) + " more";
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
};

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// 1. Shortest-path oracle equivalence.
std::string shortest_path_oracle(Check& check) {
  const auto start = Clock::now();
  Rng rng(20240101);
  std::size_t compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = fixtures::random_case(rng, 12, trial % 2 == 0);
    const auto got = tkngk(c.graph, c.query);
    const auto want = fixtures::floyd_warshall_topk(c.graph, c.query);
    const auto tag = "graph " + std::to_string(trial);
    check.require(got.size() == want.size(), tag + ": result length differs");
    for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
      check.require(got[i].sp == want[i].sp, tag + ": SP differs at position " + std::to_string(i));
      check.require(std::fabs(got[i].cost - want[i].cost) <= 1e-9, tag + ": cost differs");
      ++compared;
    }
  }
  const double elapsed = seconds_since(start);
  check.require(elapsed < 5.0, "runtime " + std::to_string(elapsed) + " s >= 5 s");
  return "200 graphs, " + std::to_string(compared) + " results compared, " + std::to_string(elapsed) + " s";
}

// 2. Constant optimizer properties and worked values.
std::string constant_optimizer_suite(Check& check) {
  Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    // Symmetric count lists have an exactly representable integer mean.
    const std::uint64_t mid = 1 + rng.below(300);
    std::vector<std::uint64_t> counts{mid};
    const auto pairs = rng.below(6);
    for (std::uint64_t p = 0; p < pairs; ++p) {
      const auto d = rng.below(mid + 1);
      counts.push_back(mid - d);
      counts.push_back(mid + d);
    }
    const auto stats = count_stats(counts);
    const AlphaParams params{rng.uniform(0.5, 10.0), rng.uniform(0.25, 4.0)};
    check.require(alpha(mid, stats, params) == 1.0, "alpha(average) != 1");

    std::vector<std::uint64_t> random_counts(1 + rng.below(25));
    for (auto& c : random_counts) c = rng.below(1000);
    const auto rs = count_stats(random_counts);
    auto c1 = rs.min + rng.below(rs.max - rs.min + 1);
    auto c2 = rs.min + rng.below(rs.max - rs.min + 1);
    if (c1 > c2) std::swap(c1, c2);
    const double a1 = alpha(c1, rs, params);
    const double a2 = alpha(c2, rs, params);
    check.require(a1 <= a2, "alpha not monotone");
    check.require(a1 >= 1.0 - 1.0 / params.beta && a2 <= 1.0 + 1.0 / params.beta, "alpha out of bounds");
  }
  const CountStats paper_stats{10, 70, 40.0, 3};
  const AlphaParams paper{5.0, 2.0};
  const double hi = alpha(70, paper_stats, paper);
  const double lo = alpha(10, paper_stats, paper);
  check.require(std::fabs(hi - 1.2) <= 1e-12, "alpha(70) = " + std::to_string(hi));
  check.require(std::fabs(lo - 0.8) <= 1e-12, "alpha(10) = " + std::to_string(lo));
  std::ostringstream s;
  s.precision(15);
  s << "1000 property cases; alpha(70)=" << hi << ", alpha(10)=" << lo;
  return s.str();
}

// 3. Pipeline ordering law.
std::string pipeline_ordering(Check& check) {
  Rng rng(303);
  ForestConfig config;
  config.n_trees = 7;
  config.max_depth = 3;
  const auto model = train(fixtures::synthetic_examples(rng, 400), config);
  RandomForestModel constant;
  constant.trees.push_back(DecisionTree{{TreeNode{-1, 0.0, 0, 0, 3}}});

  std::size_t sets = 0;
  std::size_t nonempty = 0;
  while (nonempty < 500) {
    auto c = fixtures::random_case(rng, 20, sets % 2 == 0);
    c.query.k = c.graph.node_count();
    for (const auto& sp : c.graph.service_providers()) {
      const auto count = rng.below(60);
      c.graph.set_sp_stats(sp.id, SpStats{count, count + rng.below(4 * count + 1)});
    }
    const auto raw = tkngk(c.graph, c.query);
    const auto scope = rng.below(2) == 0 ? AlphaScope::Candidates : AlphaScope::Global;
    const auto out = optimize(c.graph, c.query, raw, model, AlphaParams{}, scope);
    ++sets;
    if (raw.empty()) continue;
    ++nonempty;

    std::vector<NodeId> in_ids, out_ids;
    for (const auto& r : raw) in_ids.push_back(r.sp);
    for (const auto& r : out) out_ids.push_back(r.sp);
    std::sort(in_ids.begin(), in_ids.end());
    std::sort(out_ids.begin(), out_ids.end());
    check.require(in_ids == out_ids, "output is not a permutation of the input");
    for (std::size_t i = 1; i < out.size(); ++i) {
      const auto& a = out[i - 1];
      const auto& b = out[i];
      const bool ordered =
          a.rank > b.rank ||
          (a.rank == b.rank &&
           (a.score_c > b.score_c ||
            (a.score_c == b.score_c &&
             (a.path_cost < b.path_cost || (a.path_cost == b.path_cost && a.sp < b.sp)))));
      check.require(ordered, "ordering law violated at position " + std::to_string(i));
    }

    // Constant classifier + degenerate stats reduce to the raw order.
    for (const auto& sp : c.graph.service_providers()) c.graph.set_sp_stats(sp.id, SpStats{4, 14});
    const auto flat = optimize(c.graph, c.query, raw, constant, AlphaParams{}, scope);
    bool same = flat.size() == raw.size();
    for (std::size_t i = 0; same && i < raw.size(); ++i) same = flat[i].sp == raw[i].sp;
    check.require(same, "constant model did not preserve raw order");
  }
  return std::to_string(nonempty) + " non-empty candidate sets (" + std::to_string(sets) + " drawn)";
}

// 4. Classifier protocol on a synthetic 2,000-SP corpus through the CLI.
std::string classifier_protocol(Check& check) {
  fixtures::TempDir dir;
  Rng rng(4242);
  save_snapshot(fixtures::synthetic_sp_graph(rng, 2000), dir / "synthetic.json");
  const auto start = Clock::now();
  const auto r = run_cli({"--format", "json", "--seed", "42", "train", "--snapshot",
                          (dir / "synthetic.json").string(), "--model-out", (dir / "model.json").string(),
                          "--split-ratio", "0.8"});
  const double elapsed = seconds_since(start);
  check.require(r.code == 0, "train exited " + std::to_string(r.code) + ": " + r.err);
  if (r.code != 0) return "train failed";
  const auto doc = nlohmann::json::parse(r.out);
  const double accuracy = doc["accuracy"].get<double>();
  check.require(doc["sps_train"] == 1600 && doc["sps_test"] == 400, "split is not 80/20");
  check.require(accuracy >= 0.90, "holdout accuracy " + std::to_string(accuracy) + " < 0.90");
  check.require(elapsed < 30.0, "training took " + std::to_string(elapsed) + " s");
  return "holdout accuracy " + std::to_string(accuracy) + " on " + doc["n_test"].dump() +
         " test examples, " + std::to_string(elapsed) + " s";
}

// 5. Every CLI command is byte-deterministic.
std::string cli_determinism(Check& check) {
  fixtures::TempDir dir;
  Rng rng(55);
  std::ostringstream biz, users, reviews;
  for (int i = 0; i < 200; ++i) {
    biz << nlohmann::json{{"business_id", "b" + std::to_string(i)},
                          {"name", "Biz " + std::to_string(i)},
                          {"latitude", 40.0 + rng.uniform(-0.05, 0.05)},
                          {"longitude", -75.0 + rng.uniform(-0.05, 0.05)},
                          {"categories", fixtures::vocabulary()[rng.below(6)] + ", " +
                                             fixtures::vocabulary()[rng.below(6)]}}
               .dump()
        << "\n";
  }
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> friends;
    for (int f = 0; f < 4; ++f) friends.push_back("u" + std::to_string(rng.below(300)));
    users << nlohmann::json{{"user_id", "u" + std::to_string(i)}, {"friends", friends}}.dump() << "\n";
  }
  for (int i = 0; i < 3000; ++i) {
    reviews << nlohmann::json{{"user_id", "u" + std::to_string(rng.below(320))},
                              {"business_id", "b" + std::to_string(rng.below(200))},
                              {"stars", 1 + rng.below(5)},
                              {"date", "2020-01-" + std::to_string(10 + rng.below(20))}}
                   .dump()
            << "\n";
  }
  fixtures::write_file(dir / "business.json", biz.str());
  fixtures::write_file(dir / "user.json", users.str());
  fixtures::write_file(dir / "review.json", reviews.str());

  const std::string snap = (dir / "g.json").string();
  const std::string model = (dir / "m.json").string();
  const std::vector<std::vector<std::string>> commands{
      {"--format", "json", "ingest", (dir / "business.json").string(), (dir / "user.json").string(),
       (dir / "review.json").string(), "--out", snap},
      {"--format", "json", "--seed", "9", "train", "--snapshot", snap, "--model-out", model, "--trees", "20"},
      {"--format", "json", "query", "--snapshot", snap, "--model", model, "--user", "u1", "--keywords",
       "sushi,bar", "--lat", "40", "--lon", "-75", "--radius-m", "8000", "--k", "10", "--show-raw"},
      {"--format", "json", "stats", "--snapshot", snap}};
  const std::vector<std::string> names{"ingest", "train", "query", "stats"};
  std::size_t rows = 0;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const auto first = run_cli(commands[i]);
    const auto first_file = i == 0 ? fixtures::read_file(snap) : i == 1 ? fixtures::read_file(model) : "";
    const auto second = run_cli(commands[i]);
    const auto second_file = i == 0 ? fixtures::read_file(snap) : i == 1 ? fixtures::read_file(model) : "";
    check.require(first.code == 0 && second.code == 0, names[i] + " failed: " + first.err);
    check.require(first.out == second.out, names[i] + " JSON output differs between runs");
    check.require(first_file == second_file, names[i] + " output file differs between runs");
    if (i == 2 && first.code == 0) rows = nlohmann::json::parse(first.out)["optimized"].size();
  }
  return "ingest/train/query/stats identical across runs (query returned " + std::to_string(rows) + " rows)";
}

// 6. Desk-scale performance.
std::string desk_performance(Check& check) {
  Rng rng(6);
  GeosocialGraph g;
  const std::size_t n_nodes = 100'000;
  const std::size_t n_edges = 500'000;
  std::vector<NodeId> users, sps;
  const GeoPoint center{40.0, -75.0};
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (i % 5 == 0) {
      KeywordSet kws{"kw" + std::to_string(rng.below(50))};
      sps.push_back(g.add_service_provider("s" + std::to_string(i), "S", kws,
                                           GeoPoint{center.lat + rng.uniform(-0.5, 0.5),
                                                    center.lon + rng.uniform(-0.5, 0.5)}));
    } else {
      users.push_back(g.add_user("u" + std::to_string(i)));
    }
  }
  while (g.edge_count() < n_edges) {
    const NodeId a = users[rng.below(users.size())];
    if (rng.below(2) == 0) {
      const NodeId b = users[rng.below(users.size())];
      if (a != b) g.connect(a, b, rng.uniform(), EdgeKind::Friendship);
    } else {
      const int stars = 1 + static_cast<int>(rng.below(5));
      g.connect(a, sps[rng.below(sps.size())], stars / 5.0, EdgeKind::Review, stars);
    }
  }

  double worst = 0.0;
  std::size_t returned = 0;
  for (int i = 0; i < 5; ++i) {
    const Query q{users[rng.below(users.size())], {"kw" + std::to_string(rng.below(50))}, center, 20'000.0, 10};
    const auto start = Clock::now();
    const auto result = tkngk(g, q);
    worst = std::max(worst, seconds_since(start));
    returned += result.size();
  }
  check.require(worst < 1.0, "tkngk took " + std::to_string(worst) + " s");

  // Ingest of 100,000 synthetic reviews through the CLI.
  fixtures::TempDir dir;
  std::ostringstream biz, usr, rev;
  for (int i = 0; i < 5000; ++i) {
    biz << R"({"business_id":"b)" << i << R"(","name":"B","latitude":40.0,"longitude":-75.0,"categories":"Food, )"
        << fixtures::vocabulary()[i % 6] << "\"}\n";
  }
  for (int i = 0; i < 20000; ++i) {
    usr << R"({"user_id":"u)" << i << R"(","friends":["u)" << rng.below(20000) << R"(","u)" << rng.below(20000)
        << "\"]}\n";
  }
  for (int i = 0; i < 100000; ++i) {
    rev << R"({"user_id":"u)" << rng.below(25000) << R"(","business_id":"b)" << rng.below(5000)
        << R"(","stars":)" << 1 + rng.below(5) << R"(,"date":"2019-0)" << 1 + rng.below(9) << "-1"
        << rng.below(10) << "\"}\n";
  }
  fixtures::write_file(dir / "b.json", biz.str());
  fixtures::write_file(dir / "u.json", usr.str());
  fixtures::write_file(dir / "r.json", rev.str());
  const auto start = Clock::now();
  const auto r = run_cli({"--format", "json", "ingest", (dir / "b.json").string(), (dir / "u.json").string(),
                          (dir / "r.json").string(), "--out", (dir / "g.json").string()});
  const double ingest_s = seconds_since(start);
  check.require(r.code == 0, "ingest failed: " + r.err);
  if (r.code == 0) {
    check.require(nlohmann::json::parse(r.out)["reviews_total"] == 100000, "not all reviews ingested");
  }
  check.require(ingest_s < 30.0, "ingest took " + std::to_string(ingest_s) + " s");
  return "100k nodes / " + std::to_string(g.edge_count()) + " edges: slowest k=10 query " +
         std::to_string(worst * 1000.0) + " ms (" + std::to_string(returned) + " results over 5 queries); " +
         "100k-review ingest " + std::to_string(ingest_s) + " s";
}

// 7. Snapshot and model round-trips.
std::string round_trips(Check& check) {
  fixtures::TempDir dir;
  Rng rng(707);
  for (int i = 0; i < 50; ++i) {
    const auto g = fixtures::random_graph_with_stats(rng, 60);
    save_snapshot(g, dir / "g.json");
    check.require(load_snapshot(dir / "g.json") == g, "snapshot " + std::to_string(i) + " differs");
  }
  for (int i = 0; i < 20; ++i) {
    ForestConfig config;
    config.n_trees = 1 + static_cast<int>(rng.below(15));
    config.max_depth = 1 + static_cast<int>(rng.below(10));
    config.features_per_split = 1 + static_cast<int>(rng.below(4));
    config.min_samples_split = 2 + static_cast<int>(rng.below(5));
    config.seed = rng.next();
    const auto model = train(fixtures::synthetic_examples(rng, 50 + rng.below(300)), config);
    save_model(model, dir / "m.json");
    check.require(load_model(dir / "m.json") == model, "model " + std::to_string(i) + " differs");
  }
  return "50 graphs, 20 models";
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<std::string(Check&)> run;
  };
  const std::vector<Criterion> criteria{
      {"C1 shortest-path oracle equivalence", shortest_path_oracle},
      {"C2 constant optimizer suite", constant_optimizer_suite},
      {"C3 pipeline ordering law", pipeline_ordering},
      {"C4 classifier protocol (synthetic 2,000 SPs, 80/20)", classifier_protocol},
      {"C5 CLI determinism", cli_determinism},
      {"C6 desk-scale performance", desk_performance},
      {"C7 snapshot and model round-trips", round_trips},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Check check;
    std::string detail;
    try {
      detail = c.run(check);
    } catch (const std::exception& e) {
      check.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (check.ok() ? "[PASS] " : "[FAIL] ") << c.name << " -- " << detail << check.summary() << "\n";
    if (!check.ok()) ++failures;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
