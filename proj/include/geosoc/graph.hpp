#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "geosoc/error.hpp"
#include "geosoc/geo.hpp"

namespace geosoc {

/// Dense node identifier, assigned in insertion order across users and SPs.
struct NodeId {
  std::uint32_t value = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

inline std::string to_string(NodeId id) { return std::to_string(id.value); }

using KeywordSet = std::set<std::string>;

enum class NodeKind : std::uint8_t { User, ServiceProvider };

enum class EdgeKind : std::uint8_t { Friendship, Review };

struct UserNode {
  NodeId id;
  std::string external_id;

  friend bool operator==(const UserNode&, const UserNode&) = default;
};

struct ServiceProviderNode {
  NodeId id;
  std::string external_id;
  std::string name;
  KeywordSet keywords;
  GeoPoint location;

  friend bool operator==(const ServiceProviderNode&, const ServiceProviderNode&) = default;
};

/// Undirected edge, stored with a < b.
struct Edge {
  NodeId a;
  NodeId b;
  double weight = 0.0;
  EdgeKind kind = EdgeKind::Friendship;
  std::optional<int> stars;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Review statistics of one SP. Stars are kept as an integer sum so the
/// mean is exact and snapshots round-trip without drift.
struct SpStats {
  std::uint64_t count = 0;
  std::uint64_t star_sum = 0;

  std::optional<double> avg_stars() const {
    if (count == 0) return std::nullopt;
    return static_cast<double>(star_sum) / static_cast<double>(count);
  }

  friend bool operator==(const SpStats&, const SpStats&) = default;
};

struct Adjacent {
  NodeId neighbor;
  std::uint32_t edge = 0;  // index into GeosocialGraph::edges()
};

class GeosocialGraph {
 public:
  std::size_t node_count() const noexcept { return kinds_.size(); }
  std::size_t user_count() const noexcept { return users_.size(); }
  std::size_t sp_count() const noexcept { return sps_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  NodeId add_user(std::string external_id) {
    if (user_index_.contains(external_id)) {
      throw Error(Errc::DuplicateNode, "user '" + external_id + "'");
    }
    const NodeId id = next_id();
    user_index_.emplace(external_id, id);
    kinds_.push_back(NodeKind::User);
    slots_.push_back(static_cast<std::uint32_t>(users_.size()));
    users_.push_back(UserNode{id, std::move(external_id)});
    adjacency_.emplace_back();
    return id;
  }

  NodeId add_service_provider(std::string external_id, std::string name, KeywordSet keywords,
                              GeoPoint location) {
    if (sp_index_.contains(external_id)) {
      throw Error(Errc::DuplicateNode, "service provider '" + external_id + "'");
    }
    check_coordinate(location);
    const NodeId id = next_id();
    sp_index_.emplace(external_id, id);
    for (const auto& kw : keywords) keyword_index_[kw].push_back(id);
    kinds_.push_back(NodeKind::ServiceProvider);
    slots_.push_back(static_cast<std::uint32_t>(sps_.size()));
    sps_.push_back(ServiceProviderNode{id, std::move(external_id), std::move(name),
                                       std::move(keywords), location});
    stats_.emplace_back();
    adjacency_.emplace_back();
    return id;
  }

  /// Inserts or replaces the edge between a and b.
  const Edge& connect(NodeId a, NodeId b, double weight, EdgeKind kind,
                      std::optional<int> stars = std::nullopt) {
    if (a == b) throw Error(Errc::SelfLoop, "node " + to_string(a));
    check_node(a);
    check_node(b);
    if (!(weight >= 0.0 && weight <= 1.0)) {
      throw Error(Errc::WeightOutOfRange, std::to_string(weight));
    }
    const bool a_user = kind_of(a) == NodeKind::User;
    const bool b_user = kind_of(b) == NodeKind::User;
    if (kind == EdgeKind::Friendship) {
      if (!a_user || !b_user) throw Error(Errc::KindMismatch, "friendship needs two users");
      if (stars) throw Error(Errc::KindMismatch, "friendship edge cannot carry stars");
    } else {
      if (a_user == b_user) throw Error(Errc::KindMismatch, "review needs one user and one SP");
      if (!stars) throw Error(Errc::KindMismatch, "review edge requires stars");
      if (*stars < 1 || *stars > 5) throw Error(Errc::StarsOutOfRange, std::to_string(*stars));
    }
    if (b < a) std::swap(a, b);
    Edge edge{a, b, weight, kind, stars};

    auto& list_a = adjacency_[a.value];
    auto it = lower_bound(list_a, b);
    if (it != list_a.end() && it->neighbor == b) {
      edges_[it->edge] = edge;
      return edges_[it->edge];
    }
    const auto index = static_cast<std::uint32_t>(edges_.size());
    edges_.push_back(edge);
    list_a.insert(it, Adjacent{b, index});
    auto& list_b = adjacency_[b.value];
    list_b.insert(lower_bound(list_b, a), Adjacent{a, index});
    return edges_[index];
  }

  /// Neighbors in ascending id order.
  std::span<const Adjacent> neighbors(NodeId n) const {
    check_node(n);
    return adjacency_[n.value];
  }

  const Edge& edge(std::uint32_t index) const { return edges_.at(index); }
  std::span<const Edge> edges() const noexcept { return edges_; }

  std::optional<std::uint32_t> find_edge(NodeId a, NodeId b) const {
    check_node(a);
    check_node(b);
    const auto& list = adjacency_[a.value];
    auto it = std::lower_bound(list.begin(), list.end(), b,
                               [](const Adjacent& e, NodeId id) { return e.neighbor < id; });
    if (it == list.end() || it->neighbor != b) return std::nullopt;
    return it->edge;
  }

  NodeKind kind_of(NodeId n) const {
    check_node(n);
    return kinds_[n.value];
  }

  bool is_user(NodeId n) const { return n.value < kinds_.size() && kinds_[n.value] == NodeKind::User; }
  bool is_service_provider(NodeId n) const {
    return n.value < kinds_.size() && kinds_[n.value] == NodeKind::ServiceProvider;
  }

  const UserNode& user(NodeId n) const {
    if (kind_of(n) != NodeKind::User) throw Error(Errc::UnknownNode, "not a user: " + to_string(n));
    return users_[slots_[n.value]];
  }

  const ServiceProviderNode& service_provider(NodeId n) const {
    if (kind_of(n) != NodeKind::ServiceProvider) {
      throw Error(Errc::NotAServiceProvider, "node " + to_string(n));
    }
    return sps_[slots_[n.value]];
  }

  const SpStats& sp_stats(NodeId sp) const {
    service_provider(sp);
    return stats_[slots_[sp.value]];
  }

  /// Counts one review of `stars` towards the SP's statistics.
  void record_review(NodeId sp, int stars) {
    service_provider(sp);
    if (stars < 1 || stars > 5) throw Error(Errc::StarsOutOfRange, std::to_string(stars));
    auto& s = stats_[slots_[sp.value]];
    ++s.count;
    s.star_sum += static_cast<std::uint64_t>(stars);
  }

  void set_sp_stats(NodeId sp, SpStats stats) {
    service_provider(sp);
    if (stats.star_sum < stats.count || stats.star_sum > 5 * stats.count) {
      throw Error(Errc::InvalidStats, "star_sum inconsistent with count for " + to_string(sp));
    }
    stats_[slots_[sp.value]] = stats;
  }

  std::span<const UserNode> users() const noexcept { return users_; }
  std::span<const ServiceProviderNode> service_providers() const noexcept { return sps_; }
  std::span<const SpStats> all_sp_stats() const noexcept { return stats_; }

  std::optional<NodeId> find_user(const std::string& external_id) const {
    auto it = user_index_.find(external_id);
    if (it == user_index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<NodeId> find_service_provider(const std::string& external_id) const {
    auto it = sp_index_.find(external_id);
    if (it == sp_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Keyword token to the ascending ids of SPs carrying it.
  const std::map<std::string, std::vector<NodeId>>& keyword_index() const noexcept {
    return keyword_index_;
  }

  /// Full consistency check; throws CorruptSnapshot describing the first violation.
  void audit() const {
    auto fail = [](const std::string& what) { throw Error(Errc::CorruptSnapshot, what); };
    if (slots_.size() != kinds_.size() || adjacency_.size() != kinds_.size() ||
        users_.size() + sps_.size() != kinds_.size() || stats_.size() != sps_.size()) {
      fail("node tables disagree in size");
    }
    for (std::size_t i = 0; i < kinds_.size(); ++i) {
      const NodeId id{static_cast<std::uint32_t>(i)};
      const bool ok = kinds_[i] == NodeKind::User ? users_.at(slots_[i]).id == id
                                                  : sps_.at(slots_[i]).id == id;
      if (!ok) fail("node id table broken at " + std::to_string(i));
    }
    std::vector<int> seen(edges_.size(), 0);
    for (std::size_t i = 0; i < adjacency_.size(); ++i) {
      const NodeId self{static_cast<std::uint32_t>(i)};
      const auto& list = adjacency_[i];
      for (std::size_t j = 0; j < list.size(); ++j) {
        if (j > 0 && !(list[j - 1].neighbor < list[j].neighbor)) fail("adjacency unsorted");
        if (list[j].edge >= edges_.size()) fail("dangling edge index");
        const Edge& e = edges_[list[j].edge];
        const bool matches = (e.a == self && e.b == list[j].neighbor) ||
                             (e.b == self && e.a == list[j].neighbor);
        if (!matches) fail("adjacency does not match edge endpoints");
        ++seen[list[j].edge];
      }
    }
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const Edge& e = edges_[k];
      if (seen[k] != 2) fail("edge " + std::to_string(k) + " not in exactly two lists");
      if (!(e.a < e.b)) fail("edge endpoints not normalized");
      if (!(e.weight >= 0.0 && e.weight <= 1.0)) fail("edge weight outside [0,1]");
      const bool ua = kinds_[e.a.value] == NodeKind::User;
      const bool ub = kinds_[e.b.value] == NodeKind::User;
      if (e.kind == EdgeKind::Friendship && (!ua || !ub || e.stars)) fail("bad friendship edge");
      if (e.kind == EdgeKind::Review &&
          (ua == ub || !e.stars || *e.stars < 1 || *e.stars > 5)) {
        fail("bad review edge");
      }
    }
    std::map<std::string, std::vector<NodeId>> rebuilt;
    for (const auto& sp : sps_) {
      for (const auto& kw : sp.keywords) rebuilt[kw].push_back(sp.id);
      if (!in_bounds(sp.location)) fail("SP location out of bounds");
    }
    if (rebuilt != keyword_index_) fail("keyword index inconsistent");
    for (const auto& s : stats_) {
      if (s.star_sum < s.count || s.star_sum > 5 * s.count) fail("SP stats inconsistent");
    }
  }

  /// Structural equality: same nodes, edge set, keywords and stats.
  friend bool operator==(const GeosocialGraph& x, const GeosocialGraph& y) {
    if (x.kinds_ != y.kinds_ || x.users_ != y.users_ || x.sps_ != y.sps_ || x.stats_ != y.stats_) {
      return false;
    }
    for (std::size_t i = 0; i < x.adjacency_.size(); ++i) {
      const auto& lx = x.adjacency_[i];
      const auto& ly = y.adjacency_[i];
      if (lx.size() != ly.size()) return false;
      for (std::size_t j = 0; j < lx.size(); ++j) {
        if (lx[j].neighbor != ly[j].neighbor) return false;
        if (x.edges_[lx[j].edge] != y.edges_[ly[j].edge]) return false;
      }
    }
    return true;
  }

 private:
  NodeId next_id() const { return NodeId{static_cast<std::uint32_t>(kinds_.size())}; }

  void check_node(NodeId n) const {
    if (n.value >= kinds_.size()) throw Error(Errc::UnknownNode, "node " + to_string(n));
  }

  static std::vector<Adjacent>::iterator lower_bound(std::vector<Adjacent>& list, NodeId id) {
    return std::lower_bound(list.begin(), list.end(), id,
                            [](const Adjacent& e, NodeId n) { return e.neighbor < n; });
  }

  std::vector<NodeKind> kinds_;
  std::vector<std::uint32_t> slots_;  // index into users_ or sps_
  std::vector<UserNode> users_;
  std::vector<ServiceProviderNode> sps_;
  std::vector<SpStats> stats_;
  std::vector<std::vector<Adjacent>> adjacency_;
  std::vector<Edge> edges_;
  std::map<std::string, std::vector<NodeId>> keyword_index_;
  std::unordered_map<std::string, NodeId> user_index_;
  std::unordered_map<std::string, NodeId> sp_index_;
};

}  // namespace geosoc

template <>
struct std::hash<geosoc::NodeId> {
  std::size_t operator()(geosoc::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
