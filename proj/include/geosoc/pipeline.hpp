#pragma once

#include <algorithm>
#include <span>
#include <string_view>
#include <vector>

#include "geosoc/constant_optimizer.hpp"
#include "geosoc/graph.hpp"
#include "geosoc/query.hpp"
#include "geosoc/rank_classifier.hpp"

namespace geosoc {

/// Population over which count statistics for the alpha multiplier are taken.
enum class AlphaScope { Candidates, Global };

inline std::string_view to_string(AlphaScope scope) {
  return scope == AlphaScope::Candidates ? "candidates" : "global";
}

struct Recommendation {
  NodeId sp;
  int rank = kMinRank;
  double score_c = 0.0;
  double path_cost = 0.0;
  std::vector<NodeId> path;
  double alpha = 1.0;

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// rank desc, score_c desc, path_cost asc, sp id asc.
inline bool recommendation_before(const Recommendation& x, const Recommendation& y) {
  if (x.rank != y.rank) return x.rank > y.rank;
  if (x.score_c != y.score_c) return x.score_c > y.score_c;
  if (x.path_cost != y.path_cost) return x.path_cost < y.path_cost;
  return x.sp < y.sp;
}

inline void order_recommendations(std::vector<Recommendation>& recs) {
  std::sort(recs.begin(), recs.end(), recommendation_before);
}

inline CountStats global_count_stats(const GeosocialGraph& graph) {
  std::vector<std::uint64_t> counts;
  counts.reserve(graph.sp_count());
  for (const auto& s : graph.all_sp_stats()) counts.push_back(s.count);
  return count_stats(counts);
}

/// Classifies candidates into ranks, scores each with alpha x average stars
/// and orders best first. SPs without reviews score 0.
inline std::vector<Recommendation> optimize(const GeosocialGraph& graph, const Query& q,
                                            std::span<const Candidate> candidates,
                                            const RandomForestModel& model,
                                            const AlphaParams& params,
                                            AlphaScope scope = AlphaScope::Candidates) {
  if (model.trees.empty()) throw Error(Errc::EmptyModel, "model has no trees");
  params.validate();
  std::vector<Recommendation> out;
  if (candidates.empty()) return out;

  CountStats stats;
  if (scope == AlphaScope::Global) {
    stats = global_count_stats(graph);
  } else {
    std::vector<std::uint64_t> counts;
    counts.reserve(candidates.size());
    for (const auto& c : candidates) counts.push_back(graph.sp_stats(c.sp).count);
    stats = count_stats(counts);
  }

  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const auto& sp = graph.service_provider(c.sp);
    const auto& sp_stats = graph.sp_stats(c.sp);
    Recommendation r;
    r.sp = c.sp;
    r.rank = predict(model, extract_features(q.keywords, sp, sp_stats));
    r.alpha = alpha(sp_stats.count, stats, params);
    const auto rating = sp_stats.avg_stars();
    r.score_c = rating ? score_c(r.alpha, *rating) : 0.0;
    r.path_cost = c.cost;
    r.path = c.path;
    out.push_back(std::move(r));
  }
  order_recommendations(out);
  return out;
}

}  // namespace geosoc
