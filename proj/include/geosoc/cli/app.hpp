#pragma once

// Command-line front end: ingest, train, query, stats.
//
// Exit codes: 0 ok, 1 I/O, 2 parse/format, 3 data, 4 lookup.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geosoc/constant_optimizer.hpp"
#include "geosoc/error.hpp"
#include "geosoc/graph.hpp"
#include "geosoc/ingest.hpp"
#include "geosoc/pipeline.hpp"
#include "geosoc/query.hpp"
#include "geosoc/random.hpp"
#include "geosoc/rank_classifier.hpp"
#include "geosoc/snapshot.hpp"

namespace geosoc::cli {

enum class OutputFormat { Table, Json };

struct AppConfig {
  double beta = 5.0;
  double gamma = 2.0;
  AlphaScope alpha_scope = AlphaScope::Candidates;
  ForestConfig forest;
  double split_ratio = 0.8;
  std::uint64_t seed = 42;
  bool strict_ingest = false;
  int augment_queries = 3;

  AlphaParams alpha_params() const { return AlphaParams{beta, gamma}; }
};

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IoError:
      return 1;
    case Errc::ParseError:
    case Errc::CorruptSnapshot:
    case Errc::UnsupportedSnapshotVersion:
    case Errc::CorruptModel:
    case Errc::UnsupportedModelVersion:
    case Errc::ConfigError:
      return 2;
    case Errc::UnknownNode:
    case Errc::OriginNotUser:
      return 4;
    default:
      return 3;
  }
}

namespace detail {

inline AlphaScope parse_scope(const std::string& text) {
  if (text == "candidates") return AlphaScope::Candidates;
  if (text == "global") return AlphaScope::Global;
  throw Error(Errc::ConfigError, "alpha_scope must be 'candidates' or 'global', got '" + text + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !in.eof()) throw Error(Errc::ConfigError, "bad value for " + key + ": " + text);
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error(Errc::ConfigError, "bad boolean for " + key + ": " + text);
}

}  // namespace detail

/// Applies one `key = value` setting; unknown keys are rejected.
inline void apply_setting(AppConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "beta") {
    c.beta = parse_number<double>(key, value);
  } else if (key == "gamma") {
    c.gamma = parse_number<double>(key, value);
  } else if (key == "alpha_scope") {
    c.alpha_scope = detail::parse_scope(value);
  } else if (key == "n_trees") {
    c.forest.n_trees = parse_number<int>(key, value);
  } else if (key == "max_depth") {
    c.forest.max_depth = parse_number<int>(key, value);
  } else if (key == "min_samples_split") {
    c.forest.min_samples_split = parse_number<int>(key, value);
  } else if (key == "features_per_split") {
    c.forest.features_per_split = parse_number<int>(key, value);
  } else if (key == "split_ratio") {
    c.split_ratio = parse_number<double>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "strict_ingest") {
    c.strict_ingest = detail::parse_bool(key, value);
  } else if (key == "augment_queries") {
    c.augment_queries = parse_number<int>(key, value);
  } else {
    throw Error(Errc::ConfigError, "unknown config key '" + key + "'");
  }
}

/// Flat `key = value` file, one per line, `#` starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = geosoc::detail::trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ConfigError, path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(geosoc::detail::trim(text.substr(0, eq)), geosoc::detail::trim(text.substr(eq + 1)));
  }
  return out;
}

inline nlohmann::json report_to_json(const IngestReport& r) {
  return {{"friendship_edges", r.friendship_edges}, {"lines_skipped", r.lines_skipped},
          {"review_edges", r.review_edges},         {"reviews_collapsed", r.reviews_collapsed},
          {"reviews_total", r.reviews_total},       {"sps_added", r.sps_added},
          {"users_added", r.users_added}};
}

inline nlohmann::json eval_to_json(const EvalReport& r) {
  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& row : r.confusion) confusion.push_back(row);
  return {{"accuracy", r.accuracy}, {"confusion", confusion}, {"n_test", r.n_test}};
}

/// Builds per-SP examples: one with the SP's own keywords as the query,
/// plus `augment` seeded synthetic queries mixing own and foreign keywords.
inline std::vector<LabeledExample> make_training_examples(const GeosocialGraph& graph,
                                                          std::span<const NodeId> sps, int augment,
                                                          std::uint64_t seed) {
  std::vector<std::string> vocabulary;
  for (const auto& [kw, ids] : graph.keyword_index()) vocabulary.push_back(kw);
  std::vector<LabeledExample> out;
  for (const NodeId id : sps) {
    const auto& sp = graph.service_provider(id);
    const auto& stats = graph.sp_stats(id);
    const int label = derive_label(stats);
    if (!sp.keywords.empty()) out.push_back({extract_features(sp.keywords, sp, stats), label});
    if (vocabulary.empty()) continue;
    const std::vector<std::string> own(sp.keywords.begin(), sp.keywords.end());
    Rng rng(seed, id.value);
    for (int a = 0; a < augment; ++a) {
      KeywordSet query;
      const auto tokens = 1 + rng.below(own.size() + 1);
      for (std::uint64_t t = 0; t < tokens; ++t) {
        if (!own.empty() && rng.below(2) == 0) {
          query.insert(own[rng.below(own.size())]);
        } else {
          query.insert(vocabulary[rng.below(vocabulary.size())]);
        }
      }
      out.push_back({extract_features(query, sp, stats), label});
    }
  }
  return out;
}

struct QueryRequest {
  std::string user;
  KeywordSet keywords;
  GeoPoint center;
  double radius_m = 0.0;
  std::size_t k = 10;
};

struct QueryOutcome {
  std::vector<Candidate> raw;
  std::vector<Recommendation> optimized;
};

inline QueryOutcome run_query(const GeosocialGraph& graph, const RandomForestModel& model,
                              const AppConfig& config, const QueryRequest& request) {
  const auto origin = graph.find_user(request.user);
  if (!origin) throw Error(Errc::UnknownNode, "unknown user '" + request.user + "'");
  Query q{*origin, request.keywords, request.center, request.radius_m, request.k};
  QueryOutcome outcome;
  outcome.raw = tkngk(graph, q);
  outcome.optimized = optimize(graph, q, outcome.raw, model, config.alpha_params(), config.alpha_scope);
  return outcome;
}

inline nlohmann::json path_to_json(const GeosocialGraph& graph, std::span<const NodeId> path) {
  nlohmann::json out = nlohmann::json::array();
  for (const NodeId n : path) {
    out.push_back(graph.is_user(n) ? graph.user(n).external_id
                                   : graph.service_provider(n).external_id);
  }
  return out;
}

inline nlohmann::json recommendations_to_json(const GeosocialGraph& graph,
                                              std::span<const Recommendation> recs) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    const auto& sp = graph.service_provider(r.sp);
    out.push_back({{"position", i + 1},
                   {"sp", sp.external_id},
                   {"name", sp.name},
                   {"rank", r.rank},
                   {"score_c", r.score_c},
                   {"alpha", r.alpha},
                   {"path_cost", r.path_cost},
                   {"path", path_to_json(graph, r.path)}});
  }
  return out;
}

inline nlohmann::json candidates_to_json(const GeosocialGraph& graph, std::span<const Candidate> raw) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& sp = graph.service_provider(raw[i].sp);
    out.push_back({{"position", i + 1},
                   {"sp", sp.external_id},
                   {"name", sp.name},
                   {"path_cost", raw[i].cost},
                   {"path", path_to_json(graph, raw[i].path)}});
  }
  return out;
}

inline nlohmann::json outcome_to_json(const GeosocialGraph& graph, const QueryOutcome& outcome,
                                      bool show_raw) {
  auto optimized = recommendations_to_json(graph, outcome.optimized);
  if (!show_raw) return optimized;
  return {{"optimized", std::move(optimized)}, {"raw", candidates_to_json(graph, outcome.raw)}};
}

inline std::string join_path(const nlohmann::json& path) {
  std::string s;
  for (const auto& p : path) {
    if (!s.empty()) s += " > ";
    s += p.get<std::string>();
  }
  return s;
}

inline void print_outcome_table(std::ostream& out, const GeosocialGraph& graph,
                                const QueryOutcome& outcome, bool show_raw) {
  const auto rows = recommendations_to_json(graph, outcome.optimized);
  out << std::left << std::setw(4) << "#" << std::setw(28) << "name" << std::setw(6) << "rank"
      << std::setw(10) << "score_c" << std::setw(8) << "alpha" << std::setw(8) << "cost"
      << "path\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << std::setw(4) << r["position"].get<std::size_t>() << std::setw(28)
        << r["name"].get<std::string>() << std::setw(6) << r["rank"].get<int>() << std::setw(10)
        << r["score_c"].get<double>() << std::setw(8) << r["alpha"].get<double>() << std::setw(8)
        << r["path_cost"].get<double>() << join_path(r["path"]) << "\n";
  }
  if (show_raw) {
    out << "\nraw shortest-path order:\n";
    for (const auto& r : candidates_to_json(graph, outcome.raw)) {
      out << std::setw(4) << r["position"].get<std::size_t>() << std::setw(28)
          << r["name"].get<std::string>() << std::setw(8) << r["path_cost"].get<double>()
          << join_path(r["path"]) << "\n";
    }
  }
  out.unsetf(std::ios::fixed);
}

inline void print_flat(std::ostream& out, const nlohmann::json& obj, const std::string& prefix = "") {
  for (const auto& [key, value] : obj.items()) {
    if (value.is_object()) {
      print_flat(out, value, prefix + key + ".");
    } else {
      out << std::left << std::setw(24) << (prefix + key) << value.dump() << "\n";
    }
  }
}

inline void emit(std::ostream& out, OutputFormat format, const nlohmann::json& doc) {
  if (format == OutputFormat::Json) {
    out << doc.dump(2) << "\n";
  } else {
    print_flat(out, doc);
  }
}

inline QueryRequest request_from_json(const nlohmann::json& j) {
  QueryRequest r;
  r.user = j.at("user").get<std::string>();
  const auto& kw = j.at("keywords");
  if (kw.is_array()) {
    std::string joined;
    for (const auto& k : kw) joined += k.get<std::string>() + ",";
    r.keywords = keywords_from_categories(joined);
  } else {
    r.keywords = keywords_from_categories(kw.get<std::string>());
  }
  r.center = GeoPoint{j.at("lat").get<double>(), j.at("lon").get<double>()};
  r.radius_m = j.at("radius_m").get<double>();
  r.k = j.value("k", std::size_t{10});
  return r;
}

/// Entry point shared by the executable and the tests.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geosocial top-k keyword recommendations with hierarchical re-ranking", "geosoc"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string format_name = "table";
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--format", format_name, "output format")->check(CLI::IsMember({"table", "json"}));
  auto* seed_opt = app.add_option("--seed", seed, "random seed (default 42)");

  // Flags that override config-file values.
  double beta = 0, gamma = 0, split_ratio = 0;
  std::string scope_name;
  int n_trees = 0, max_depth = 0, min_split = 0, per_split = 0, augment = 0;
  bool strict = false;

  auto add_alpha_flags = [&](CLI::App* sub) {
    sub->add_option("--beta", beta, "alpha damping (default 5)");
    sub->add_option("--gamma", gamma, "alpha exponent (default 2)");
    sub->add_option("--alpha-scope", scope_name, "count statistics scope")
        ->check(CLI::IsMember({"candidates", "global"}));
  };

  auto* ingest = app.add_subcommand("ingest", "build a graph snapshot from Yelp-style JSON lines");
  std::string business_path, user_path, review_path, snapshot_out;
  ingest->add_option("business", business_path, "business JSON-lines file")->required();
  ingest->add_option("user", user_path, "user JSON-lines file")->required();
  ingest->add_option("review", review_path, "review JSON-lines file")->required();
  ingest->add_option("--out", snapshot_out, "snapshot output path")->required();
  auto* strict_opt = ingest->add_flag("--strict", strict, "fail on the first malformed line");

  auto* train_cmd = app.add_subcommand("train", "train the rank classifier on a snapshot");
  std::string snapshot_path, model_path;
  train_cmd->add_option("--snapshot", snapshot_path, "graph snapshot")->required();
  train_cmd->add_option("--model-out", model_path, "model output path")->required();
  auto* trees_opt = train_cmd->add_option("--trees", n_trees, "number of trees");
  auto* depth_opt = train_cmd->add_option("--max-depth", max_depth, "maximum tree depth");
  auto* min_split_opt = train_cmd->add_option("--min-samples-split", min_split, "minimum node size to split");
  auto* per_split_opt = train_cmd->add_option("--features-per-split", per_split, "features tried per split");
  auto* ratio_opt = train_cmd->add_option("--split-ratio", split_ratio, "training fraction");
  auto* augment_opt = train_cmd->add_option("--augment", augment, "synthetic queries per SP");

  auto* query_cmd = app.add_subcommand("query", "run a top-k query and re-rank the results");
  std::string query_model, user_id, keywords_csv, batch_path;
  double lat = 0, lon = 0, radius_m = 0;
  std::size_t k = 10;
  bool show_raw = false;
  query_cmd->add_option("--snapshot", snapshot_path, "graph snapshot")->required();
  query_cmd->add_option("--model", query_model, "trained model")->required();
  auto* user_opt = query_cmd->add_option("--user", user_id, "querying user id");
  query_cmd->add_option("--keywords", keywords_csv, "comma-separated keywords");
  query_cmd->add_option("--lat", lat, "range center latitude");
  query_cmd->add_option("--lon", lon, "range center longitude");
  query_cmd->add_option("--radius-m", radius_m, "range radius in meters");
  query_cmd->add_option("--k", k, "number of results");
  query_cmd->add_flag("--show-raw", show_raw, "also print the raw shortest-path order");
  auto* batch_opt = query_cmd->add_option("--batch", batch_path, "JSON-lines file of queries");
  user_opt->excludes(batch_opt);
  add_alpha_flags(query_cmd);

  auto* stats_cmd = app.add_subcommand("stats", "print graph statistics");
  stats_cmd->add_option("--snapshot", snapshot_path, "graph snapshot")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    AppConfig config;
    if (!config_path.empty()) {
      for (const auto& [key, value] : read_config_file(config_path)) apply_setting(config, key, value);
    }
    if (seed_opt->count()) config.seed = seed;
    if (!query_cmd->get_option("--beta")->empty()) config.beta = beta;
    if (!query_cmd->get_option("--gamma")->empty()) config.gamma = gamma;
    if (!scope_name.empty()) config.alpha_scope = detail::parse_scope(scope_name);
    if (trees_opt->count()) config.forest.n_trees = n_trees;
    if (depth_opt->count()) config.forest.max_depth = max_depth;
    if (min_split_opt->count()) config.forest.min_samples_split = min_split;
    if (per_split_opt->count()) config.forest.features_per_split = per_split;
    if (ratio_opt->count()) config.split_ratio = split_ratio;
    if (augment_opt->count()) config.augment_queries = augment;
    if (strict_opt->count()) config.strict_ingest = strict;
    config.forest.seed = config.seed;
    config.alpha_params().validate();
    if (config.augment_queries < 0) throw Error(Errc::ConfigError, "augment_queries must be >= 0");
    const auto format = format_name == "json" ? OutputFormat::Json : OutputFormat::Table;

    if (*ingest) {
      const IngestConfig ingest_config{config.strict_ingest};
      auto open = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(Errc::IoError, "cannot open " + path);
        return in;
      };
      auto business_in = open(business_path);
      auto user_in = open(user_path);
      auto review_in = open(review_path);
      auto businesses = parse_businesses(business_in, ingest_config);
      auto users = parse_users(user_in, ingest_config);
      auto reviews = parse_reviews(review_in, ingest_config);
      auto built = build_graph(businesses.records, users.records, reviews.records, ingest_config);
      built.report.lines_skipped +=
          businesses.lines_skipped + users.lines_skipped + reviews.lines_skipped;
      save_snapshot(built.graph, snapshot_out);
      emit(out, format, report_to_json(built.report));
      return 0;
    }

    if (*train_cmd) {
      const auto graph = load_snapshot(snapshot_path);
      std::vector<NodeId> reviewed;
      for (const auto& sp : graph.service_providers()) {
        if (graph.sp_stats(sp.id).count > 0) reviewed.push_back(sp.id);
      }
      if (reviewed.size() < 2) {
        throw Error(Errc::TooFewExamples,
                    "need at least 2 reviewed SPs, found " + std::to_string(reviewed.size()));
      }
      const auto split = split_train_test(reviewed, config.split_ratio, config.seed);
      const auto train_examples =
          make_training_examples(graph, split.train, config.augment_queries, config.seed);
      const auto test_examples =
          make_training_examples(graph, split.test, config.augment_queries, config.seed);
      if (test_examples.empty()) throw Error(Errc::TooFewExamples, "test split produced no examples");
      const auto model = train(train_examples, config.forest);
      save_model(model, model_path);
      auto doc = eval_to_json(evaluate(model, test_examples));
      doc["n_train"] = train_examples.size();
      doc["sps_train"] = split.train.size();
      doc["sps_test"] = split.test.size();
      emit(out, format, doc);
      return 0;
    }

    if (*query_cmd) {
      const auto graph = load_snapshot(snapshot_path);
      const auto model = load_model(query_model);
      if (!batch_path.empty()) {
        std::ifstream in(batch_path);
        if (!in) throw Error(Errc::IoError, "cannot open " + batch_path);
        std::vector<std::string> lines;
        for (std::string line; std::getline(in, line);) {
          if (!geosoc::detail::trim(line).empty()) lines.push_back(line);
        }
        std::vector<nlohmann::json> results(lines.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
          for (std::size_t i = next++; i < lines.size(); i = next++) {
            try {
              const auto request = request_from_json(nlohmann::json::parse(lines[i]));
              results[i] = outcome_to_json(graph, run_query(graph, model, config, request), show_raw);
            } catch (const std::exception& e) {
              results[i] = {{"error", e.what()}};
            }
          }
        };
        const auto n_workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1,
                                                       std::max<std::size_t>(lines.size(), 1));
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
        worker();
        pool.clear();
        if (format == OutputFormat::Json) {
          out << nlohmann::json(results).dump(2) << "\n";
        } else {
          for (std::size_t i = 0; i < results.size(); ++i) out << "query " << i + 1 << ": " << results[i].dump() << "\n";
        }
        return 0;
      }
      if (user_id.empty()) throw Error(Errc::InvalidArgument, "--user is required without --batch");
      QueryRequest request{user_id, keywords_from_categories(keywords_csv), GeoPoint{lat, lon}, radius_m, k};
      const auto outcome = run_query(graph, model, config, request);
      if (format == OutputFormat::Json) {
        out << outcome_to_json(graph, outcome, show_raw).dump(2) << "\n";
      } else {
        print_outcome_table(out, graph, outcome, show_raw);
      }
      return 0;
    }

    if (*stats_cmd) {
      const auto graph = load_snapshot(snapshot_path);
      std::uint64_t friendship = 0, review = 0, reviews_total = 0;
      for (const auto& e : graph.edges()) (e.kind == EdgeKind::Friendship ? friendship : review)++;
      std::vector<std::uint64_t> counts;
      for (const auto& s : graph.all_sp_stats()) {
        counts.push_back(s.count);
        reviews_total += s.count;
      }
      CountStats cs;
      if (!counts.empty()) cs = count_stats(counts);
      nlohmann::json doc = {
          {"nodes", graph.node_count()},
          {"users", graph.user_count()},
          {"sps", graph.sp_count()},
          {"edges", graph.edge_count()},
          {"friendship_edges", friendship},
          {"review_edges", review},
          {"reviews_total", reviews_total},
          {"count_stats", {{"min", cs.min}, {"max", cs.max}, {"average", cs.average}, {"n", cs.n}}}};
      emit(out, format, doc);
      return 0;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace geosoc::cli
