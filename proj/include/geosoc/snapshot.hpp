#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "geosoc/error.hpp"
#include "geosoc/graph.hpp"

namespace geosoc {

inline constexpr const char* kSnapshotVersion = "1";

inline std::string_view edge_kind_name(EdgeKind kind) {
  return kind == EdgeKind::Friendship ? "friendship" : "review";
}

inline nlohmann::json snapshot_to_json(const GeosocialGraph& graph) {
  using nlohmann::json;
  json users = json::array();
  for (const auto& u : graph.users()) {
    users.push_back({{"external_id", u.external_id}, {"id", u.id.value}});
  }
  json sps = json::array();
  json stats = json::object();
  for (const auto& sp : graph.service_providers()) {
    sps.push_back({{"external_id", sp.external_id},
                   {"id", sp.id.value},
                   {"keywords", sp.keywords},
                   {"lat", sp.location.lat},
                   {"lon", sp.location.lon},
                   {"name", sp.name}});
    const auto& s = graph.sp_stats(sp.id);
    stats[to_string(sp.id)] = {{"count", s.count}, {"star_sum", s.star_sum}};
  }
  std::vector<Edge> edges(graph.edges().begin(), graph.edges().end());
  std::sort(edges.begin(), edges.end(),
            [](const Edge& x, const Edge& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
  json edge_list = json::array();
  for (const auto& e : edges) {
    json j = {{"a", e.a.value}, {"b", e.b.value}, {"kind", edge_kind_name(e.kind)},
              {"weight", e.weight}};
    if (e.stars) j["stars"] = *e.stars;
    edge_list.push_back(std::move(j));
  }
  return json{{"version", kSnapshotVersion},
              {"users", std::move(users)},
              {"sps", std::move(sps)},
              {"edges", std::move(edge_list)},
              {"stats", std::move(stats)}};
}

namespace detail {

struct NodeRow {
  std::uint32_t id;
  const nlohmann::json* row;
  bool is_user;
};

}  // namespace detail

inline GeosocialGraph snapshot_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("version")) {
    throw Error(Errc::CorruptSnapshot, "missing version field");
  }
  if (!doc["version"].is_string() || doc["version"].get<std::string>() != kSnapshotVersion) {
    throw Error(Errc::UnsupportedSnapshotVersion, doc["version"].dump());
  }
  try {
    std::vector<detail::NodeRow> rows;
    for (const auto& u : doc.at("users")) rows.push_back({u.at("id").get<std::uint32_t>(), &u, true});
    for (const auto& s : doc.at("sps")) rows.push_back({s.at("id").get<std::uint32_t>(), &s, false});
    std::sort(rows.begin(), rows.end(),
              [](const auto& x, const auto& y) { return x.id < y.id; });

    GeosocialGraph graph;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].id != i) throw Error(Errc::CorruptSnapshot, "node ids are not dense");
      const auto& r = *rows[i].row;
      if (rows[i].is_user) {
        graph.add_user(r.at("external_id").get<std::string>());
      } else {
        graph.add_service_provider(r.at("external_id").get<std::string>(),
                                   r.at("name").get<std::string>(),
                                   r.at("keywords").get<KeywordSet>(),
                                   GeoPoint{r.at("lat").get<double>(), r.at("lon").get<double>()});
      }
    }
    for (const auto& e : doc.at("edges")) {
      const auto kind_name = e.at("kind").get<std::string>();
      EdgeKind kind;
      if (kind_name == "friendship") {
        kind = EdgeKind::Friendship;
      } else if (kind_name == "review") {
        kind = EdgeKind::Review;
      } else {
        throw Error(Errc::CorruptSnapshot, "unknown edge kind " + kind_name);
      }
      std::optional<int> stars;
      if (e.contains("stars")) stars = e.at("stars").get<int>();
      const NodeId a{e.at("a").get<std::uint32_t>()};
      const NodeId b{e.at("b").get<std::uint32_t>()};
      if (graph.find_edge(a, b)) throw Error(Errc::CorruptSnapshot, "duplicate edge");
      graph.connect(a, b, e.at("weight").get<double>(), kind, stars);
    }
    const auto& stats = doc.at("stats");
    if (stats.size() != graph.sp_count()) {
      throw Error(Errc::CorruptSnapshot, "stats keys do not match SP ids");
    }
    for (const auto& sp : graph.service_providers()) {
      const auto& s = stats.at(to_string(sp.id));
      graph.set_sp_stats(sp.id, SpStats{s.at("count").get<std::uint64_t>(),
                                        s.at("star_sum").get<std::uint64_t>()});
    }
    graph.audit();
    return graph;
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptSnapshot) throw;
    throw Error(Errc::CorruptSnapshot, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptSnapshot, e.what());
  }
}

inline std::string snapshot_to_string(const GeosocialGraph& graph) {
  return snapshot_to_json(graph).dump(1) + "\n";
}

inline void save_snapshot(const GeosocialGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << snapshot_to_string(graph);
  if (!out.flush()) throw Error(Errc::IoError, "write failed: " + path.string());
}

inline GeosocialGraph load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::CorruptSnapshot, e.what());
  }
  return snapshot_from_json(doc);
}

}  // namespace geosoc
