#include <gtest/gtest.h>

#include "geosoc/rank_classifier.hpp"
#include "test_support.hpp"

using namespace geosoc;

namespace {

RandomForestModel leaf_model(std::vector<int> labels) {
  RandomForestModel m;
  for (int label : labels) m.trees.push_back(DecisionTree{{TreeNode{-1, 0.0, 0, 0, label}}});
  m.config.n_trees = static_cast<int>(labels.size());
  return m;
}

}  // namespace

TEST(RankClassifier, ExtractFeatures) {
  ServiceProviderNode sp{NodeId{3}, "s", "S", {"sushi", "bar", "parking"}, {0, 0}};
  const auto f = extract_features({"sushi", "ramen"}, sp, SpStats{12, 48});
  EXPECT_DOUBLE_EQ(f.ratio_m, 0.5);
  EXPECT_DOUBLE_EQ(f.ratio_s, 1.0 / 3.0);
  EXPECT_EQ(f.count, 12u);
  EXPECT_DOUBLE_EQ(f.score_avg, 4.0);

  const auto same = extract_features(sp.keywords, sp, SpStats{});
  EXPECT_DOUBLE_EQ(same.ratio_m, 1.0);
  EXPECT_DOUBLE_EQ(same.ratio_s, 1.0);
  EXPECT_DOUBLE_EQ(same.score_avg, 0.0);

  const auto none = extract_features({"pizza"}, sp, SpStats{});
  EXPECT_DOUBLE_EQ(none.ratio_m, 0.0);
  EXPECT_DOUBLE_EQ(none.ratio_s, 0.0);

  ServiceProviderNode bare{NodeId{4}, "b", "B", {}, {0, 0}};
  EXPECT_DOUBLE_EQ(extract_features({"pizza"}, bare, SpStats{}).ratio_s, 0.0);
  EXPECT_THROW(extract_features({}, sp, SpStats{}), Error);
}

TEST(RankClassifier, RatioProperties) {
  Rng rng(8);
  const auto& vocab = fixtures::vocabulary();
  for (int i = 0; i < 500; ++i) {
    KeywordSet q, s;
    for (int j = 0; j < 4; ++j) {
      if (rng.below(2)) q.insert(vocab[rng.below(vocab.size())]);
      if (rng.below(2)) s.insert(vocab[rng.below(vocab.size())]);
    }
    if (q.empty()) q.insert(vocab[0]);
    const ServiceProviderNode sp{NodeId{0}, "s", "S", s, {0, 0}};
    const auto f = extract_features(q, sp, SpStats{});
    EXPECT_GE(f.ratio_m, 0.0);
    EXPECT_LE(f.ratio_m, 1.0);
    EXPECT_GE(f.ratio_s, 0.0);
    EXPECT_LE(f.ratio_s, 1.0);
    if (std::includes(s.begin(), s.end(), q.begin(), q.end())) {
      EXPECT_EQ(f.ratio_m, 1.0);
    }
    if (!s.empty() && std::includes(q.begin(), q.end(), s.begin(), s.end())) {
      EXPECT_EQ(f.ratio_s, 1.0);
    }
  }
}

TEST(RankClassifier, DeriveLabel) {
  EXPECT_EQ(derive_label(SpStats{5, 23}), 5);  // 4.6
  EXPECT_EQ(derive_label(SpStats{2, 7}), 4);   // 3.5 rounds up
  EXPECT_EQ(derive_label(SpStats{3, 3}), 1);
  EXPECT_EQ(derive_label(SpStats{4, 10}), 3);  // 2.5 rounds up
  EXPECT_THROW(derive_label(SpStats{}), Error);
}

TEST(RankClassifier, SplitTrainTest) {
  std::vector<int> items(10);
  std::iota(items.begin(), items.end(), 0);
  const auto a = split_train_test(items, 0.8, 1);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.test.size(), 2u);
  const auto b = split_train_test(items, 0.8, 1);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);

  std::vector<int> all = a.train;
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, items);

  auto code_of = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  EXPECT_EQ(code_of([] { split_train_test(std::vector<int>{1}, 0.8, 1); }), Errc::TooFewExamples);
  EXPECT_EQ(code_of([&] { split_train_test(items, 1.0, 1); }), Errc::InvalidRatio);
  EXPECT_EQ(code_of([&] { split_train_test(items, 0.0, 1); }), Errc::InvalidRatio);
  EXPECT_EQ(code_of([] { split_train_test(std::vector<int>{1, 2}, 0.3, 1); }), Errc::TooFewExamples);
}

TEST(RankClassifier, PureTrainingSetGivesLeaves) {
  Rng rng(4);
  auto examples = fixtures::synthetic_examples(rng, 50);
  for (auto& e : examples) e.label = 3;
  ForestConfig config;
  config.n_trees = 10;
  const auto model = train(examples, config);
  for (const auto& tree : model.trees) {
    ASSERT_EQ(tree.nodes.size(), 1u);
    EXPECT_EQ(tree.nodes[0].label, 3);
  }
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(predict(model, FeatureVector{rng.uniform(), rng.uniform(), rng.below(100), rng.uniform(0, 5)}), 3);
  }
}

TEST(RankClassifier, TrainingIsDeterministic) {
  Rng rng(5);
  const auto examples = fixtures::synthetic_examples(rng, 300);
  ForestConfig config;
  config.n_trees = 20;
  config.seed = 77;
  const auto a = train(examples, config);
  const auto b = train(examples, config);
  EXPECT_EQ(a, b);
  config.seed = 78;
  EXPECT_NE(train(examples, config), a);
}

TEST(RankClassifier, TrainValidation) {
  ForestConfig config;
  EXPECT_THROW(train(std::vector<LabeledExample>{}, config), Error);
  std::vector<LabeledExample> bad{{FeatureVector{}, 3}, {FeatureVector{}, 6}};
  try {
    train(bad, config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LabelOutOfRange);
  }
  config.features_per_split = 5;
  EXPECT_THROW(train(std::vector<LabeledExample>{{FeatureVector{}, 3}, {FeatureVector{}, 3}}, config), Error);
}

TEST(RankClassifier, TreeInvariants) {
  Rng rng(6);
  const auto examples = fixtures::synthetic_examples(rng, 400);
  ForestConfig config;
  config.n_trees = 15;
  config.max_depth = 4;
  const auto model = train(examples, config);
  for (const auto& tree : model.trees) {
    // Depth bound: walk with an explicit stack.
    std::vector<std::pair<std::uint32_t, int>> stack{{0, 0}};
    while (!stack.empty()) {
      const auto [at, depth] = stack.back();
      stack.pop_back();
      const auto& node = tree.nodes[at];
      EXPECT_LE(depth, config.max_depth);
      if (node.is_leaf()) {
        EXPECT_GE(node.label, 1);
        EXPECT_LE(node.label, 5);
      } else {
        EXPECT_GE(node.feature, 0);
        EXPECT_LT(node.feature, 4);
        stack.push_back({node.left, depth + 1});
        stack.push_back({node.right, depth + 1});
      }
    }
  }
  for (int i = 0; i < 200; ++i) {
    const int p = predict(model, FeatureVector{rng.uniform(-1, 2), rng.uniform(-1, 2), rng.below(1000), rng.uniform(-1, 7)});
    EXPECT_GE(p, 1);
    EXPECT_LE(p, 5);
  }
}

TEST(RankClassifier, PredictVotingAndRouting) {
  EXPECT_EQ(predict(leaf_model({3}), FeatureVector{0.3, 0.2, 5, 4.0}), 3);
  EXPECT_EQ(predict(leaf_model({5, 5, 2, 2}), FeatureVector{}), 2);
  EXPECT_EQ(predict(leaf_model({4, 1, 4}), FeatureVector{}), 4);

  RandomForestModel routed;
  routed.trees.push_back(DecisionTree{{TreeNode{0, 0.5, 1, 2, 1}, TreeNode{-1, 0, 0, 0, 1}, TreeNode{-1, 0, 0, 0, 5}}});
  EXPECT_EQ(predict(routed, FeatureVector{0.7, 0, 0, 0}), 5);
  EXPECT_EQ(predict(routed, FeatureVector{0.3, 0, 0, 0}), 1);
  EXPECT_EQ(predict(routed, FeatureVector{0.5, 0, 0, 0}), 5);

  EXPECT_THROW(predict(RandomForestModel{}, FeatureVector{}), Error);
}

TEST(RankClassifier, SingleTreeSeparatesOneFeatureSplit) {
  Rng rng(10);
  std::vector<LabeledExample> examples;
  for (int i = 0; i < 100; ++i) {
    const double r = rng.uniform();
    examples.push_back({FeatureVector{r, rng.uniform(), rng.below(50), rng.uniform(1, 5)}, r < 0.5 ? 1 : 4});
  }
  ForestConfig config;
  config.n_trees = 1;
  config.max_depth = 64;
  config.features_per_split = 4;
  const auto model = train(examples, config);
  EXPECT_DOUBLE_EQ(evaluate(model, examples).accuracy, 1.0);
}

TEST(RankClassifier, SyntheticHoldoutAccuracy) {
  Rng rng(42);
  const auto examples = fixtures::synthetic_examples(rng, 2000);
  const auto split = split_train_test(examples, 0.8, 42);
  const auto model = train(split.train, ForestConfig{});
  const auto report = evaluate(model, split.test);
  EXPECT_GE(report.accuracy, 0.9);
}

TEST(RankClassifier, Evaluate) {
  const auto model = leaf_model({2});
  const std::vector<LabeledExample> right{{FeatureVector{}, 2}, {FeatureVector{}, 2}};
  const auto perfect = evaluate(model, right);
  EXPECT_DOUBLE_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.confusion[1][1], 2u);

  const std::vector<LabeledExample> half{{FeatureVector{}, 2}, {FeatureVector{}, 5}};
  const auto r = evaluate(model, half);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  EXPECT_EQ(r.confusion[4][1], 1u);

  EXPECT_THROW(evaluate(model, std::vector<LabeledExample>{}), Error);

  Rng rng(12);
  const auto examples = fixtures::synthetic_examples(rng, 300);
  ForestConfig config;
  config.n_trees = 5;
  config.max_depth = 2;
  const auto small = train(examples, config);
  const auto report = evaluate(small, examples);
  std::uint64_t sum = 0, trace = 0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) sum += report.confusion[i][j];
    trace += report.confusion[i][i];
  }
  EXPECT_EQ(sum, report.n_test);
  EXPECT_DOUBLE_EQ(report.accuracy, static_cast<double>(trace) / static_cast<double>(sum));
}

TEST(RankClassifier, ModelFileRoundTrip) {
  fixtures::TempDir dir;
  Rng rng(13);
  const auto examples = fixtures::synthetic_examples(rng, 200);
  ForestConfig config;
  config.n_trees = 7;
  const auto model = train(examples, config);
  save_model(model, dir / "m.json");
  EXPECT_EQ(load_model(dir / "m.json"), model);

  auto doc = model_to_json(model);
  doc["version"] = "2";
  EXPECT_THROW(model_from_json(doc), Error);
  doc = model_to_json(model);
  doc["trees"][0][0] = {{"feature", 9}, {"left", 1}, {"right", 2}, {"threshold", 0.5}};
  EXPECT_THROW(model_from_json(doc), Error);
}
