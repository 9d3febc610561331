#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gstam/gnn.hpp"
#include "gstam/graph_data.hpp"

namespace gstam {

enum class Metric { accuracy, roc_auc };

std::string metric_name(Metric metric);
Metric parse_metric(const std::string& text);

struct TrainOptions {
  std::size_t epochs = 500;
  double lr = 0.001;
  // 0 trains full-batch; otherwise shuffled mini-batches of this size.
  std::size_t batch_size = 0;
};

struct EvalConfig {
  TrainOptions train;
  std::size_t models_per_set = 10;
  std::size_t distill_repeats = 5;
  Metric metric = Metric::accuracy;
};

struct EvalResult {
  std::string metric;
  std::string architecture;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over all runs
  std::vector<double> runs;
};

// A training set for evaluation: synthetic graphs, or a real-graph subset
// whose dataset indices are kept in `source_indices`.
struct CondensedSet {
  std::vector<Graph> graphs;
  std::vector<std::size_t> source_indices;
};

// Fresh model trained with Adam on softmax cross-entropy of the head output.
ModelParams train_classifier(std::span<const Graph> train_set, const GnnConfig& config,
                             std::size_t feature_dim, const TrainOptions& options,
                             std::uint64_t seed);

double accuracy(const ModelParams& params, std::span<const Graph> graphs);

// Mann-Whitney estimate of P(score_pos > score_neg), ties counting 1/2.
// labels are 0/1; throws MetricError when only one class is present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

double score(const ModelParams& params, const GraphDataset& dataset,
             std::span<const std::size_t> indices, Metric metric);

// Trains `models_per_set` fresh models on every condensed set and scores each
// on the dataset's test split. Run seeds depend only on (seed, set, model).
EvalResult evaluate_condensed(const GraphDataset& dataset, std::span<const CondensedSet> sets,
                              const GnnConfig& arch, const EvalConfig& config,
                              std::uint64_t seed);

std::vector<EvalResult> cross_architecture(const GraphDataset& dataset,
                                           std::span<const CondensedSet> sets,
                                           std::span<const GnnConfig> test_archs,
                                           const EvalConfig& config, std::uint64_t seed);

// Training split of the dataset as a condensed set, for the full-data reference.
CondensedSet full_training_set(const GraphDataset& dataset);
CondensedSet subset_of(const GraphDataset& dataset, std::span<const std::size_t> indices);

}  // namespace gstam
