#include <gtest/gtest.h>

#include <algorithm>

#include "gstam/errors.hpp"
#include "gstam/evaluation.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gstam;
using gstam::testing::random_graph;
using gstam::testing::toy_dataset;

namespace {

EvalConfig quick_config() {
  EvalConfig cfg;
  cfg.train.epochs = 20;
  cfg.models_per_set = 2;
  return cfg;
}

const GnnConfig kSmall{Arch::gcn, 2, 16, 2};

}  // namespace

TEST(Metric, Parse) {
  EXPECT_EQ(parse_metric("accuracy"), Metric::accuracy);
  EXPECT_EQ(parse_metric("roc_auc"), Metric::roc_auc);
  EXPECT_THROW(parse_metric("f1"), ConfigError);
}

TEST(RocAuc, Examples) {
  const std::vector<double> s = {0.9, 0.4, 0.6};
  const std::vector<int> y = {1, 0, 1};
  EXPECT_EQ(roc_auc(s, y), 1.0);
  const std::vector<double> perfect = {0.1, 0.2, 0.8, 0.9};
  EXPECT_EQ(roc_auc(perfect, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(roc_auc(perfect, std::vector<int>{1, 1, 0, 0}), 0.0);
  const std::vector<double> flat(6, 0.3);
  EXPECT_EQ(roc_auc(flat, std::vector<int>{0, 1, 0, 1, 1, 0}), 0.5);
}

TEST(RocAuc, SingleClassThrows) {
  const std::vector<double> s = {0.1, 0.2};
  EXPECT_THROW(roc_auc(s, std::vector<int>{1, 1}), MetricError);
}

TEST(RocAuc, MatchesPairwiseCount) {
  Rng rng(12);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> level(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(trial % 40);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // Coarse score levels force plenty of ties.
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) / 10.0;
      y[i] = coin(rng);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(roc_auc(s, y), oracle::pairwise_auc(s, y), 1e-12);
  }
}

TEST(RocAuc, OrderInvariant) {
  const std::vector<double> s = {0.3, 0.9, 0.1, 0.5, 0.5};
  const std::vector<int> y = {0, 1, 0, 1, 0};
  std::vector<double> s2(s.rbegin(), s.rend());
  std::vector<int> y2(y.rbegin(), y.rend());
  EXPECT_EQ(roc_auc(s, y), roc_auc(s2, y2));
}

TEST(TrainClassifier, OverfitsSeparablePair) {
  Rng rng(3);
  const std::vector<Graph> train = {random_graph(5, 0, 3, rng), random_graph(5, 1, 3, rng)};
  const ModelParams p = train_classifier(train, GnnConfig{}, 3, TrainOptions{}, 0);
  EXPECT_EQ(accuracy(p, train), 1.0);
}

TEST(TrainClassifier, ZeroEpochsIsInitialization) {
  Rng rng(3);
  const std::vector<Graph> train = {random_graph(5, 0, 3, rng)};
  const ModelParams p = train_classifier(train, kSmall, 3, TrainOptions{.epochs = 0}, 4);
  Rng init_rng(4);
  EXPECT_EQ(params_fingerprint(p), params_fingerprint(init_params(kSmall, 3, init_rng)));
}

TEST(TrainClassifier, DeterministicUnderSeed) {
  const GraphDataset ds = toy_dataset(6, 2);
  const CondensedSet set = full_training_set(ds);
  const TrainOptions opts{.epochs = 10, .batch_size = 4};
  EXPECT_EQ(params_fingerprint(train_classifier(set.graphs, kSmall, 3, opts, 5)),
            params_fingerprint(train_classifier(set.graphs, kSmall, 3, opts, 5)));
}

TEST(TrainClassifier, EmptySetThrows) {
  EXPECT_THROW(train_classifier({}, kSmall, 3, TrainOptions{}, 0), ContractError);
}

TEST(TrainClassifier, NonFiniteLossReportsEpoch) {
  Rng rng(3);
  std::vector<Graph> train = {random_graph(5, 0, 3, rng)};
  train[0].features(0, 0) = NAN;
  try {
    train_classifier(train, kSmall, 3, TrainOptions{.epochs = 3}, 0);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  }
}

TEST(Score, AccuracyAndAucInRange) {
  const GraphDataset ds = toy_dataset(20, 4);
  const CondensedSet set = full_training_set(ds);
  const ModelParams p = train_classifier(set.graphs, kSmall, 3, TrainOptions{.epochs = 30}, 1);
  const double acc = score(p, ds, ds.split.test, Metric::accuracy);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  const double auc = score(p, ds, ds.split.test, Metric::roc_auc);
  EXPECT_GE(auc, 0.0);
  EXPECT_LE(auc, 1.0);
  std::vector<std::size_t> reversed(ds.split.test.rbegin(), ds.split.test.rend());
  EXPECT_EQ(score(p, ds, reversed, Metric::accuracy), acc);
  EXPECT_EQ(score(p, ds, reversed, Metric::roc_auc), auc);
}

TEST(Evaluate, RunCountAndPopulationStd) {
  const GraphDataset ds = toy_dataset(10, 4);
  const std::vector<CondensedSet> sets = {subset_of(ds, std::vector<std::size_t>{ds.class_members(0)[0], ds.class_members(1)[0]}),
                                          subset_of(ds, std::vector<std::size_t>{ds.class_members(0)[1], ds.class_members(1)[1]})};
  const EvalResult r = evaluate_condensed(ds, sets, kSmall, quick_config(), 7);
  ASSERT_EQ(r.runs.size(), 4u);
  double mean = 0.0;
  for (double v : r.runs) mean += v / 4.0;
  double var = 0.0;
  for (double v : r.runs) var += (v - mean) * (v - mean) / 4.0;
  EXPECT_NEAR(r.mean, mean, 1e-15);
  EXPECT_NEAR(r.std, std::sqrt(var), 1e-15);
  EXPECT_EQ(r.architecture, "GCN-2C");
  EXPECT_EQ(r.metric, "accuracy");
}

TEST(Evaluate, IdenticalInputsIdenticalResult) {
  const GraphDataset ds = toy_dataset(10, 4);
  const std::vector<CondensedSet> sets = {full_training_set(ds)};
  const EvalResult a = evaluate_condensed(ds, sets, kSmall, quick_config(), 1);
  const EvalResult b = evaluate_condensed(ds, sets, kSmall, quick_config(), 1);
  EXPECT_EQ(a.runs, b.runs);
}

TEST(Evaluate, RejectsHeldOutGraphs) {
  const GraphDataset ds = toy_dataset(10, 4);
  const std::vector<CondensedSet> sets = {subset_of(ds, std::vector<std::size_t>{ds.split.test[0]})};
  EXPECT_THROW(evaluate_condensed(ds, sets, kSmall, quick_config(), 1), ContractError);
}

TEST(CrossArchitecture, MatchesSingleEvaluation) {
  const GraphDataset ds = toy_dataset(10, 4);
  const std::vector<CondensedSet> sets = {full_training_set(ds)};
  const std::vector<GnnConfig> archs = {parse_arch("gcn2", 2, 16), parse_arch("gcn3", 2, 16),
                                        parse_arch("gin", 2, 16)};
  const auto table = cross_architecture(ds, sets, archs, quick_config(), 3);
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[2].architecture, "GIN-3C");
  const EvalResult single = evaluate_condensed(ds, sets, archs[1], quick_config(), 3);
  EXPECT_EQ(table[1].runs, single.runs);
}
