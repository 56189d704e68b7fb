#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "geosoc/error.hpp"
#include "geosoc/graph.hpp"
#include "geosoc/query.hpp"
#include "geosoc/random.hpp"

namespace geosoc {

inline constexpr int kMinRank = 1;
inline constexpr int kMaxRank = 5;
inline constexpr int kRankCount = kMaxRank - kMinRank + 1;
inline constexpr int kFeatureCount = 4;

/// The four per-SP features, in model feature-index order.
struct FeatureVector {
  double ratio_m = 0.0;
  double ratio_s = 0.0;
  std::uint64_t count = 0;
  double score_avg = 0.0;

  double operator[](int feature) const {
    switch (feature) {
      case 0: return ratio_m;
      case 1: return ratio_s;
      case 2: return static_cast<double>(count);
      case 3: return score_avg;
      default: throw Error(Errc::InvalidArgument, "feature index " + std::to_string(feature));
    }
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct LabeledExample {
  FeatureVector features;
  int label = kMinRank;
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 8;
  int min_samples_split = 2;
  int features_per_split = 2;
  std::uint64_t seed = 42;

  void validate() const {
    if (n_trees < 1) throw Error(Errc::InvalidArgument, "n_trees must be >= 1");
    if (max_depth < 1) throw Error(Errc::InvalidArgument, "max_depth must be >= 1");
    if (min_samples_split < 2) throw Error(Errc::InvalidArgument, "min_samples_split must be >= 2");
    if (features_per_split < 1 || features_per_split > kFeatureCount) {
      throw Error(Errc::InvalidArgument, "features_per_split must be in 1..4");
    }
  }

  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

/// Flat binary tree node; a leaf when feature < 0.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  int label = kMinRank;  // 0 on internal nodes

  bool is_leaf() const noexcept { return feature < 0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int predict(const FeatureVector& f) const {
    std::uint32_t at = 0;
    while (!nodes[at].is_leaf()) {
      at = f[nodes[at].feature] < nodes[at].threshold ? nodes[at].left : nodes[at].right;
    }
    return nodes[at].label;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  ForestConfig config;
  std::uint64_t example_count = 0;
  std::int64_t trained_at = 0;  // seconds since epoch; 0 unless SOURCE_DATE_EPOCH is set

  friend bool operator==(const RandomForestModel&, const RandomForestModel&) = default;
};

struct EvalReport {
  double accuracy = 0.0;
  std::array<std::array<std::uint64_t, kRankCount>, kRankCount> confusion{};  // [actual][predicted]
  std::uint64_t n_test = 0;
};

inline FeatureVector extract_features(const KeywordSet& query_keywords,
                                      const ServiceProviderNode& sp, const SpStats& stats) {
  if (query_keywords.empty()) throw Error(Errc::EmptyKeywords, "query keyword set is empty");
  const auto common = static_cast<double>(shared_keywords(query_keywords, sp.keywords));
  FeatureVector f;
  f.ratio_m = common / static_cast<double>(query_keywords.size());
  f.ratio_s = sp.keywords.empty() ? 0.0 : common / static_cast<double>(sp.keywords.size());
  f.count = stats.count;
  f.score_avg = stats.avg_stars().value_or(0.0);
  return f;
}

/// Ground-truth rank: average stars rounded half-up.
inline int derive_label(const SpStats& stats) {
  const auto avg = stats.avg_stars();
  if (!avg) throw Error(Errc::NoReviews, "SP has no reviews");
  return std::clamp(static_cast<int>(std::floor(*avg + 0.5)), kMinRank, kMaxRank);
}

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

/// Seeded shuffle, then the first floor(ratio * n) items train.
template <typename T>
Split<T> split_train_test(std::vector<T> items, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(Errc::InvalidRatio, std::to_string(ratio));
  if (items.size() < 2) throw Error(Errc::TooFewExamples, "need at least 2 examples");
  const auto n_train =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(items.size())));
  if (n_train == 0 || n_train == items.size()) {
    throw Error(Errc::TooFewExamples, "split leaves an empty side");
  }
  Rng rng(seed);
  rng.shuffle(items);
  Split<T> out;
  out.test.assign(std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(n_train)),
                  std::make_move_iterator(items.end()));
  items.resize(n_train);
  out.train = std::move(items);
  return out;
}

namespace detail {

using ClassCounts = std::array<std::uint32_t, kRankCount>;

inline double gini(const ClassCounts& counts, std::uint32_t total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (const auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

/// Majority class; ties go to the lower rank.
inline int majority(const ClassCounts& counts) {
  int best = 0;
  for (int i = 1; i < kRankCount; ++i) {
    if (counts[i] > counts[best]) best = i;
  }
  return best + kMinRank;
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const LabeledExample> data, const ForestConfig& config, Rng& rng)
      : data_(data), config_(config), rng_(rng) {}

  DecisionTree build(std::vector<std::uint32_t> sample) {
    tree_.nodes.clear();
    grow(sample, 0);
    return std::move(tree_);
  }

 private:
  struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  std::uint32_t grow(std::vector<std::uint32_t>& sample, int depth) {
    ClassCounts counts{};
    for (const auto i : sample) ++counts[data_[i].label - kMinRank];
    const auto index = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{-1, 0.0, 0, 0, majority(counts)});

    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    if (pure || depth >= config_.max_depth ||
        sample.size() < static_cast<std::size_t>(config_.min_samples_split)) {
      return index;
    }
    const auto choice = best_split(sample);
    if (choice.feature < 0) return index;

    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    for (const auto i : sample) {
      (data_[i].features[choice.feature] < choice.threshold ? left : right).push_back(i);
    }
    sample.clear();
    sample.shrink_to_fit();
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    auto& node = tree_.nodes[index];
    node.feature = choice.feature;
    node.threshold = choice.threshold;
    node.left = l;
    node.right = r;
    node.label = 0;
    return index;
  }

  // Tries `features_per_split` random features first and falls back to the
  // rest only when none of them admits a threshold.
  SplitChoice best_split(const std::vector<std::uint32_t>& sample) {
    std::array<int, kFeatureCount> order{0, 1, 2, 3};
    for (int i = 0; i < kFeatureCount - 1; ++i) {
      const auto j = i + static_cast<int>(rng_.below(static_cast<std::uint64_t>(kFeatureCount - i)));
      std::swap(order[i], order[j]);
    }
    SplitChoice best;
    for (int i = 0; i < kFeatureCount; ++i) {
      if (i >= config_.features_per_split && best.feature >= 0) break;
      evaluate_feature(sample, order[i], best);
    }
    return best;
  }

  void evaluate_feature(const std::vector<std::uint32_t>& sample, int feature, SplitChoice& best) {
    std::vector<std::pair<double, int>> rows;
    rows.reserve(sample.size());
    for (const auto i : sample) rows.emplace_back(data_[i].features[feature], data_[i].label - kMinRank);
    std::sort(rows.begin(), rows.end());

    ClassCounts right{};
    for (const auto& r : rows) ++right[r.second];
    ClassCounts left{};
    const auto total = static_cast<std::uint32_t>(rows.size());
    for (std::uint32_t i = 0; i + 1 < total; ++i) {
      ++left[rows[i].second];
      --right[rows[i].second];
      if (rows[i].first == rows[i + 1].first) continue;
      const std::uint32_t nl = i + 1;
      const std::uint32_t nr = total - nl;
      const double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
      if (best.feature < 0 || impurity < best.impurity) {
        double threshold = rows[i].first + (rows[i + 1].first - rows[i].first) / 2.0;
        if (threshold <= rows[i].first) threshold = rows[i + 1].first;
        best = SplitChoice{feature, threshold, impurity};
      }
    }
  }

  std::span<const LabeledExample> data_;
  const ForestConfig& config_;
  Rng& rng_;
  DecisionTree tree_;
};

}  // namespace detail

inline RandomForestModel train(std::span<const LabeledExample> examples, const ForestConfig& config) {
  config.validate();
  if (examples.empty() || examples.size() < static_cast<std::size_t>(config.min_samples_split)) {
    throw Error(Errc::TooFewExamples, "have " + std::to_string(examples.size()) + " examples");
  }
  for (const auto& e : examples) {
    if (e.label < kMinRank || e.label > kMaxRank) {
      throw Error(Errc::LabelOutOfRange, std::to_string(e.label));
    }
  }
  RandomForestModel model;
  model.config = config;
  model.example_count = examples.size();
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) model.trained_at = std::atoll(epoch);

  const auto n = static_cast<std::uint32_t>(examples.size());
  model.trees.reserve(static_cast<std::size_t>(config.n_trees));
  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng(config.seed, static_cast<std::uint64_t>(t));
    std::vector<std::uint32_t> sample(n);
    for (auto& s : sample) s = static_cast<std::uint32_t>(rng.below(n));
    detail::TreeBuilder builder(examples, config, rng);
    model.trees.push_back(builder.build(std::move(sample)));
  }
  return model;
}

/// Majority vote over trees; ties go to the lower rank.
inline int predict(const RandomForestModel& model, const FeatureVector& f) {
  if (model.trees.empty()) throw Error(Errc::EmptyModel, "model has no trees");
  detail::ClassCounts votes{};
  for (const auto& tree : model.trees) ++votes[tree.predict(f) - kMinRank];
  return detail::majority(votes);
}

inline EvalReport evaluate(const RandomForestModel& model, std::span<const LabeledExample> test) {
  if (test.empty()) throw Error(Errc::EmptyTestSet, "no test examples");
  EvalReport report;
  std::uint64_t correct = 0;
  for (const auto& e : test) {
    if (e.label < kMinRank || e.label > kMaxRank) {
      throw Error(Errc::LabelOutOfRange, std::to_string(e.label));
    }
    const int p = predict(model, e.features);
    ++report.confusion[e.label - kMinRank][p - kMinRank];
    if (p == e.label) ++correct;
  }
  report.n_test = test.size();
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.n_test);
  return report;
}

// ---------------------------------------------------------------------------
// Model file

inline constexpr const char* kModelVersion = "1";

inline nlohmann::json model_to_json(const RandomForestModel& model) {
  using nlohmann::json;
  json trees = json::array();
  for (const auto& tree : model.trees) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) {
        nodes.push_back({{"label", node.label}});
      } else {
        nodes.push_back({{"feature", node.feature},
                         {"left", node.left},
                         {"right", node.right},
                         {"threshold", node.threshold}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  const auto& c = model.config;
  return json{{"version", kModelVersion},
              {"config",
               {{"features_per_split", c.features_per_split},
                {"max_depth", c.max_depth},
                {"min_samples_split", c.min_samples_split},
                {"n_trees", c.n_trees},
                {"seed", c.seed}}},
              {"meta", {{"example_count", model.example_count}, {"trained_at", model.trained_at}}},
              {"trees", std::move(trees)}};
}

inline RandomForestModel model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("version")) {
    throw Error(Errc::CorruptModel, "missing version field");
  }
  if (!doc["version"].is_string() || doc["version"].get<std::string>() != kModelVersion) {
    throw Error(Errc::UnsupportedModelVersion, doc["version"].dump());
  }
  try {
    RandomForestModel model;
    const auto& c = doc.at("config");
    model.config.features_per_split = c.at("features_per_split").get<int>();
    model.config.max_depth = c.at("max_depth").get<int>();
    model.config.min_samples_split = c.at("min_samples_split").get<int>();
    model.config.n_trees = c.at("n_trees").get<int>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    model.example_count = doc.at("meta").at("example_count").get<std::uint64_t>();
    model.trained_at = doc.at("meta").at("trained_at").get<std::int64_t>();
    for (const auto& nodes : doc.at("trees")) {
      DecisionTree tree;
      for (const auto& n : nodes) {
        TreeNode node;
        if (n.contains("label")) {
          node.label = n.at("label").get<int>();
          if (node.label < kMinRank || node.label > kMaxRank) {
            throw Error(Errc::CorruptModel, "leaf label out of range");
          }
        } else {
          node.label = 0;
          node.feature = n.at("feature").get<int>();
          node.threshold = n.at("threshold").get<double>();
          node.left = n.at("left").get<std::uint32_t>();
          node.right = n.at("right").get<std::uint32_t>();
          if (node.feature < 0 || node.feature >= kFeatureCount) {
            throw Error(Errc::CorruptModel, "feature index out of range");
          }
        }
        tree.nodes.push_back(node);
      }
      if (tree.nodes.empty()) throw Error(Errc::CorruptModel, "empty tree");
      for (std::uint32_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& node = tree.nodes[i];
        if (node.is_leaf()) continue;
        if (node.left <= i || node.right <= i || node.left >= tree.nodes.size() ||
            node.right >= tree.nodes.size()) {
          throw Error(Errc::CorruptModel, "child index must point forward inside the tree");
        }
      }
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptModel, e.what());
  }
}

inline void save_model(const RandomForestModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump() << "\n";
  if (!out.flush()) throw Error(Errc::IoError, "write failed: " + path.string());
}

inline RandomForestModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::CorruptModel, e.what());
  }
}

}  // namespace geosoc
