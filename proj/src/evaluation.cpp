#include "gstam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gstam/errors.hpp"
#include "gstam/seeding.hpp"

namespace gstam {

std::string metric_name(Metric metric) {
  return metric == Metric::accuracy ? "accuracy" : "roc_auc";
}

Metric parse_metric(const std::string& text) {
  if (text == "accuracy" || text == "acc") return Metric::accuracy;
  if (text == "roc_auc" || text == "roc-auc" || text == "auc") return Metric::roc_auc;
  throw ConfigError("unknown metric '" + text + "' (expected accuracy or roc_auc)");
}

ModelParams train_classifier(std::span<const Graph> train_set, const GnnConfig& config,
                             std::size_t feature_dim, const TrainOptions& options,
                             std::uint64_t seed) {
  if (train_set.empty()) throw ContractError("train_classifier: empty training set");
  Rng rng(seed);
  ModelParams params = init_params(config, feature_dim, rng, /*trainable=*/true);
  Adam optimizer(params.all(), AdamOptions{.lr = options.lr});

  std::vector<Var> adjacency;
  std::vector<Var> features;
  for (const Graph& g : train_set) {
    adjacency.push_back(Var::constant(g.adjacency));
    features.push_back(Var::constant(g.features));
  }
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch =
      options.batch_size == 0 ? train_set.size() : std::min(options.batch_size, train_set.size());

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    if (batch < train_set.size()) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, order.size());
      std::vector<Var> heads;
      std::vector<int> labels;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        heads.push_back(forward(params, adjacency[i], features[i]).head_output);
        labels.push_back(train_set[i].label);
      }
      const Var loss = ops::softmax_cross_entropy(ops::concat_rows(heads), labels);
      if (!std::isfinite(loss.item())) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      optimizer.zero_grad();
      backward(loss);
      optimizer.step();
    }
  }
  return params;
}

double accuracy(const ModelParams& params, std::span<const Graph> graphs) {
  if (graphs.empty()) throw ContractError("accuracy: no graphs");
  std::size_t correct = 0;
  for (const Graph& g : graphs) correct += argmax(predict(params, g)) == g.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(graphs.size());
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("roc_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks (1-based) so each tied pair contributes exactly one half.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricError("roc_auc: needs both positive and negative samples");
  }
  const double p = static_cast<double>(positives);
  const double q = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double score(const ModelParams& params, const GraphDataset& dataset,
             std::span<const std::size_t> indices, Metric metric) {
  if (indices.empty()) throw ContractError("score: empty test split");
  if (metric == Metric::accuracy) {
    std::size_t correct = 0;
    for (std::size_t i : indices) {
      const Graph& g = dataset.graphs.at(i);
      correct += argmax(predict(params, g)) == g.label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
  }
  if (dataset.num_classes != 2) throw MetricError("roc_auc requires a binary task");
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i : indices) {
    const Graph& g = dataset.graphs.at(i);
    scores.push_back(softmax(predict(params, g))[1]);
    labels.push_back(g.label);
  }
  return roc_auc(scores, labels);
}

namespace {

void check_disjoint(const GraphDataset& dataset, const CondensedSet& set) {
  std::set<std::size_t> held_out(dataset.split.val.begin(), dataset.split.val.end());
  held_out.insert(dataset.split.test.begin(), dataset.split.test.end());
  for (std::size_t idx : set.source_indices) {
    if (held_out.count(idx)) {
      throw ContractError("condensed set uses held-out graph " + std::to_string(idx));
    }
  }
}

void summarize(EvalResult& result) {
  const double n = static_cast<double>(result.runs.size());
  result.mean = std::accumulate(result.runs.begin(), result.runs.end(), 0.0) / n;
  double sq = 0.0;
  for (double r : result.runs) sq += (r - result.mean) * (r - result.mean);
  result.std = std::sqrt(sq / n);
}

}  // namespace

EvalResult evaluate_condensed(const GraphDataset& dataset, std::span<const CondensedSet> sets,
                              const GnnConfig& arch, const EvalConfig& config,
                              std::uint64_t seed) {
  if (sets.empty()) throw ContractError("evaluate_condensed: no condensed sets");
  if (config.models_per_set < 1) throw ConfigError("evaluate_condensed: models_per_set must be >= 1");
  EvalResult result;
  result.metric = metric_name(config.metric);
  result.architecture = arch.name();
  for (std::size_t s = 0; s < sets.size(); ++s) {
    check_disjoint(dataset, sets[s]);
    for (std::size_t k = 0; k < config.models_per_set; ++k) {
      const std::uint64_t run_seed = derive_seed(seed, "eval-model", s * config.models_per_set + k);
      const ModelParams model =
          train_classifier(sets[s].graphs, arch, dataset.feature_dim, config.train, run_seed);
      result.runs.push_back(score(model, dataset, dataset.split.test, config.metric));
    }
  }
  summarize(result);
  return result;
}

std::vector<EvalResult> cross_architecture(const GraphDataset& dataset,
                                           std::span<const CondensedSet> sets,
                                           std::span<const GnnConfig> test_archs,
                                           const EvalConfig& config, std::uint64_t seed) {
  std::vector<EvalResult> table;
  for (const GnnConfig& arch : test_archs) {
    table.push_back(evaluate_condensed(dataset, sets, arch, config, seed));
  }
  return table;
}

CondensedSet subset_of(const GraphDataset& dataset, std::span<const std::size_t> indices) {
  CondensedSet set;
  for (std::size_t i : indices) {
    set.graphs.push_back(dataset.graphs.at(i));
    set.source_indices.push_back(i);
  }
  return set;
}

CondensedSet full_training_set(const GraphDataset& dataset) {
  return subset_of(dataset, dataset.split.train);
}

}  // namespace gstam
