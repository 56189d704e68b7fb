#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "geosoc/error.hpp"
#include "geosoc/graph.hpp"

namespace geosoc {

struct BusinessRecord {
  std::string business_id;
  std::string name;
  double latitude = 0.0;
  double longitude = 0.0;
  std::optional<std::string> categories;
};

struct UserRecord {
  std::string user_id;
  std::vector<std::string> friends;
};

struct ReviewRecord {
  std::string user_id;
  std::string business_id;
  int stars = 0;
  std::string date;
};

struct IngestReport {
  std::uint64_t users_added = 0;
  std::uint64_t sps_added = 0;
  std::uint64_t friendship_edges = 0;
  std::uint64_t review_edges = 0;
  std::uint64_t reviews_total = 0;
  std::uint64_t reviews_collapsed = 0;
  std::uint64_t lines_skipped = 0;
};

struct IngestConfig {
  bool strict = false;
};

template <typename Record>
struct Parsed {
  std::vector<Record> records;
  std::uint64_t lines_skipped = 0;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return std::string(s.substr(begin, end - begin));
}

inline std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline std::string required_string(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw std::invalid_argument(std::string(key) + " is not a string");
  auto s = v.get<std::string>();
  if (s.empty()) throw std::invalid_argument(std::string(key) + " is empty");
  return s;
}

inline double required_number(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(std::string(key) + " is not a number");
  return v.get<double>();
}

inline BusinessRecord business_from_json(const nlohmann::json& j) {
  BusinessRecord r;
  r.business_id = required_string(j, "business_id");
  r.name = j.contains("name") && j["name"].is_string() ? j["name"].get<std::string>() : "";
  r.latitude = required_number(j, "latitude");
  r.longitude = required_number(j, "longitude");
  if (!in_bounds(GeoPoint{r.latitude, r.longitude})) {
    throw std::invalid_argument("coordinates out of range");
  }
  if (j.contains("categories") && j["categories"].is_string()) {
    r.categories = j["categories"].get<std::string>();
  }
  return r;
}

// Yelp ships friends either as a JSON array or as one comma-separated
// string where "None" means no friends.
inline UserRecord user_from_json(const nlohmann::json& j) {
  UserRecord r;
  r.user_id = required_string(j, "user_id");
  if (j.contains("friends")) {
    const auto& f = j["friends"];
    if (f.is_array()) {
      for (const auto& x : f) r.friends.push_back(x.get<std::string>());
    } else if (f.is_string()) {
      const auto text = f.get<std::string>();
      if (trim(text) != "None") {
        for (auto& part : split_commas(text)) {
          if (!part.empty()) r.friends.push_back(std::move(part));
        }
      }
    } else if (!f.is_null()) {
      throw std::invalid_argument("friends must be an array or string");
    }
  }
  return r;
}

inline ReviewRecord review_from_json(const nlohmann::json& j) {
  ReviewRecord r;
  r.user_id = required_string(j, "user_id");
  r.business_id = required_string(j, "business_id");
  const double stars = required_number(j, "stars");
  if (stars != std::floor(stars) || stars < 1.0 || stars > 5.0) {
    throw std::invalid_argument("stars must be an integer in 1..5");
  }
  r.stars = static_cast<int>(stars);
  r.date = j.contains("date") && j["date"].is_string() ? j["date"].get<std::string>() : "";
  return r;
}

template <typename Record, typename Convert>
Parsed<Record> parse_lines(std::istream& in, const IngestConfig& config, Convert convert) {
  Parsed<Record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.records.push_back(convert(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      if (config.strict) throw ParseError(line_no, e.what());
      ++out.lines_skipped;
    }
  }
  if (in.bad()) throw Error(Errc::IoError, "read failed");
  return out;
}

}  // namespace detail

inline Parsed<BusinessRecord> parse_businesses(std::istream& in, const IngestConfig& config = {}) {
  return detail::parse_lines<BusinessRecord>(in, config, detail::business_from_json);
}

inline Parsed<UserRecord> parse_users(std::istream& in, const IngestConfig& config = {}) {
  return detail::parse_lines<UserRecord>(in, config, detail::user_from_json);
}

inline Parsed<ReviewRecord> parse_reviews(std::istream& in, const IngestConfig& config = {}) {
  return detail::parse_lines<ReviewRecord>(in, config, detail::review_from_json);
}

/// Comma-separated category text to a normalized keyword set.
inline KeywordSet keywords_from_categories(const std::optional<std::string>& categories) {
  KeywordSet out;
  if (!categories) return out;
  for (auto& part : detail::split_commas(*categories)) {
    if (part.empty()) continue;
    std::transform(part.begin(), part.end(), part.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.insert(std::move(part));
  }
  return out;
}

inline double stars_to_weight(int stars) {
  if (stars < 1 || stars > 5) throw Error(Errc::StarsOutOfRange, std::to_string(stars));
  return static_cast<double>(stars) / 5.0;
}

inline constexpr double kMinIntimacy = 0.1;

/// Jaccard similarity of two sorted friend lists, floored at kMinIntimacy.
template <typename T>
double intimacy(std::span<const T> friends_a, std::span<const T> friends_b) {
  std::size_t common = 0;
  auto ia = friends_a.begin();
  auto ib = friends_b.begin();
  while (ia != friends_a.end() && ib != friends_b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const std::size_t total = friends_a.size() + friends_b.size() - common;
  if (total == 0) return kMinIntimacy;
  return std::max(kMinIntimacy, static_cast<double>(common) / static_cast<double>(total));
}

template <typename T>
double intimacy(const std::set<T>& friends_a, const std::set<T>& friends_b) {
  const std::vector<T> a(friends_a.begin(), friends_a.end());
  const std::vector<T> b(friends_b.begin(), friends_b.end());
  return intimacy<T>(std::span<const T>(a), std::span<const T>(b));
}

struct BuildResult {
  GeosocialGraph graph;
  IngestReport report;
};

/// Assembles the geosocial graph. Node ids: businesses in input order,
/// then users in input order, then review authors missing from the user file.
inline BuildResult build_graph(const std::vector<BusinessRecord>& businesses,
                               const std::vector<UserRecord>& users,
                               const std::vector<ReviewRecord>& reviews,
                               const IngestConfig& config = {}) {
  BuildResult result;
  auto& g = result.graph;
  auto& report = result.report;

  auto skip = [&](Errc code, const std::string& what) {
    if (config.strict) throw Error(code, what);
    ++report.lines_skipped;
  };

  for (const auto& b : businesses) {
    if (g.find_service_provider(b.business_id)) {
      skip(Errc::DuplicateNode, "business " + b.business_id);
      continue;
    }
    g.add_service_provider(b.business_id, b.name, keywords_from_categories(b.categories),
                           GeoPoint{b.latitude, b.longitude});
    ++report.sps_added;
  }
  std::vector<const UserRecord*> user_rows;
  for (const auto& u : users) {
    if (g.find_user(u.user_id)) {
      skip(Errc::DuplicateNode, "user " + u.user_id);
      continue;
    }
    g.add_user(u.user_id);
    user_rows.push_back(&u);
    ++report.users_added;
  }

  struct Latest {
    std::string date;
    int stars;
  };
  std::map<std::pair<NodeId, NodeId>, Latest> latest;  // (user, sp)
  for (const auto& r : reviews) {
    const auto sp = g.find_service_provider(r.business_id);
    if (!sp) {
      ++report.lines_skipped;  // dangling reference, never fatal
      continue;
    }
    auto user = g.find_user(r.user_id);
    if (!user) {
      user = g.add_user(r.user_id);
      ++report.users_added;
    }
    g.record_review(*sp, r.stars);
    ++report.reviews_total;
    auto [it, fresh] = latest.try_emplace({*user, *sp}, Latest{r.date, r.stars});
    if (!fresh && (r.date > it->second.date ||
                   (r.date == it->second.date && r.stars > it->second.stars))) {
      it->second = Latest{r.date, r.stars};
    }
  }

  // Symmetric friend lists restricted to known users.
  std::unordered_map<std::uint32_t, std::vector<NodeId>> friends;
  for (const auto* row : user_rows) {
    const NodeId self = *g.find_user(row->user_id);
    for (const auto& f : row->friends) {
      const auto other = g.find_user(f);
      if (!other || *other == self) {
        ++report.lines_skipped;
        continue;
      }
      friends[self.value].push_back(*other);
      friends[other->value].push_back(self);
    }
  }
  for (auto& [id, list] : friends) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  std::vector<std::uint32_t> with_friends;
  for (const auto& [id, list] : friends) with_friends.push_back(id);
  std::sort(with_friends.begin(), with_friends.end());
  for (const auto id : with_friends) {
    const auto& mine = friends[id];
    for (const NodeId other : mine) {
      if (other.value < id) continue;
      const auto& theirs = friends[other.value];
      const double w = intimacy<NodeId>(std::span<const NodeId>(mine), std::span<const NodeId>(theirs));
      g.connect(NodeId{id}, other, w, EdgeKind::Friendship);
      ++report.friendship_edges;
    }
  }

  for (const auto& [pair, best] : latest) {
    g.connect(pair.first, pair.second, stars_to_weight(best.stars), EdgeKind::Review, best.stars);
    ++report.review_edges;
  }
  report.reviews_collapsed = report.reviews_total - report.review_edges;
  return result;
}

}  // namespace geosoc
