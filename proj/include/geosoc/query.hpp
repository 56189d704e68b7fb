#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "geosoc/error.hpp"
#include "geosoc/geo.hpp"
#include "geosoc/graph.hpp"

namespace geosoc {

struct Query {
  NodeId origin;
  KeywordSet keywords;
  GeoPoint center;
  double radius_m = 0.0;
  std::size_t k = 0;
};

struct Candidate {
  NodeId sp;
  double cost = 0.0;
  std::vector<NodeId> path;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Length of an edge of trust `weight`.
inline double edge_cost(double weight) {
  if (!(weight >= 0.0 && weight <= 1.0)) {
    throw Error(Errc::WeightOutOfRange, std::to_string(weight));
  }
  return 1.0 - weight;
}

inline std::size_t shared_keywords(const KeywordSet& a, const KeywordSet& b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    const int c = ia->compare(*ib);
    if (c < 0) {
      ++ia;
    } else if (c > 0) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

/// Closed-disk spatial test plus at least one shared keyword.
inline bool is_eligible(const ServiceProviderNode& sp, const Query& q) {
  if (haversine_m(sp.location, q.center) > q.radius_m) return false;
  return shared_keywords(q.keywords, sp.keywords) >= 1;
}

inline void validate_query(const GeosocialGraph& graph, const Query& q) {
  if (q.origin.value >= graph.node_count()) {
    throw Error(Errc::UnknownNode, "origin " + to_string(q.origin));
  }
  if (!graph.is_user(q.origin)) throw Error(Errc::OriginNotUser, "origin " + to_string(q.origin));
  if (q.keywords.empty()) throw Error(Errc::EmptyKeywords, "query keyword set is empty");
  check_coordinate(q.center);
  if (!(q.radius_m >= 0.0)) throw Error(Errc::InvalidArgument, "radius must be >= 0");
}

/// Top-k nearest eligible SPs by shortest-path cost from the query origin,
/// sorted by (cost, id). Dijkstra stops once k eligible SPs are settled and
/// no unsettled node can tie the k-th cost.
inline std::vector<Candidate> tkngk(const GeosocialGraph& graph, const Query& q) {
  validate_query(graph, q);
  std::vector<Candidate> out;
  if (q.k == 0) return out;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  const std::size_t n = graph.node_count();
  std::vector<double> dist(n, kInf);
  std::vector<std::uint32_t> pred(n, kNone);
  std::vector<bool> settled(n, false);

  using Entry = std::pair<double, std::uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
  dist[q.origin.value] = 0.0;
  frontier.emplace(0.0, q.origin.value);

  struct Hit {
    NodeId sp;
    double cost;
  };
  std::vector<Hit> hits;
  double cutoff = kInf;

  while (!frontier.empty()) {
    const auto [d, u] = frontier.top();
    if (d > cutoff) break;
    frontier.pop();
    if (settled[u] || d > dist[u]) continue;
    settled[u] = true;
    const NodeId node{u};
    if (graph.is_service_provider(node) && is_eligible(graph.service_provider(node), q)) {
      hits.push_back({node, d});
      if (hits.size() == q.k) cutoff = d;
    }
    for (const auto& adj : graph.neighbors(node)) {
      const auto v = adj.neighbor.value;
      if (settled[v]) continue;
      const double nd = d + edge_cost(graph.edge(adj.edge).weight);
      if (nd < dist[v]) {
        dist[v] = nd;
        pred[v] = u;
        frontier.emplace(nd, v);
      }
    }
  }

  std::sort(hits.begin(), hits.end(), [](const Hit& x, const Hit& y) {
    return x.cost != y.cost ? x.cost < y.cost : x.sp < y.sp;
  });
  if (hits.size() > q.k) hits.resize(q.k);
  out.reserve(hits.size());
  for (const auto& h : hits) {
    Candidate c{h.sp, h.cost, {}};
    for (std::uint32_t at = h.sp.value; at != kNone; at = pred[at]) c.path.push_back(NodeId{at});
    std::reverse(c.path.begin(), c.path.end());
    out.push_back(std::move(c));
  }
  return out;
}

/// Sum of edge costs along a node path; throws UnknownNode if a hop has no edge.
inline double path_cost(const GeosocialGraph& graph, std::span<const NodeId> path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto e = graph.find_edge(path[i - 1], path[i]);
    if (!e) throw Error(Errc::UnknownNode, "no edge on path hop " + std::to_string(i));
    total += edge_cost(graph.edge(*e).weight);
  }
  return total;
}

}  // namespace geosoc
