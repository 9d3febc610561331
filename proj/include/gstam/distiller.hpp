#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gstam/autodiff.hpp"
#include "gstam/gnn.hpp"
#include "gstam/graph_data.hpp"
#include "gstam/stam.hpp"

namespace gstam {

enum class InitMode { random, kcenter };

std::string init_mode_name(InitMode mode);
InitMode parse_init_mode(const std::string& text);

struct DistillConfig {
  std::size_t graphs_per_class = 1;
  std::size_t iterations = 1000;
  double feature_lr = 0.005;
  double adjacency_lr = 0.01;
  double lambda = 0.1;
  double p = 2.0;
  std::size_t real_batch_size = 256;
  InitMode init = InitMode::kcenter;
  std::uint64_t seed = 0;
  // Architecture of the randomly initialized networks; num_classes is
  // overwritten from the dataset.
  GnnConfig model;

  void validate() const;
};

nlohmann::json config_to_json(const DistillConfig& config);

// Learnable synthetic graph. The adjacency logits are stored as the strict
// upper triangle, so every materialized logit matrix is symmetric.
struct SyntheticGraph {
  Var features;      // n x d
  Var upper_logits;  // 1 x n(n-1)/2
  int label = 0;

  std::size_t node_count() const { return features.rows(); }
  // n x n symmetric logit matrix with zero diagonal.
  Tensor logits() const;
};

// sigmoid of the logits off the diagonal, zeros on it; differentiable.
Var soft_adjacency(const SyntheticGraph& graph);

// graphs_per_class graphs per class, ordered by class, each with
// mean_node_count(dataset) nodes.
std::vector<SyntheticGraph> init_synthetic(const GraphDataset& dataset, const DistillConfig& config,
                                           Rng& rng);

struct DistillReport {
  std::vector<LossBreakdown> loss_history;
  std::vector<SyntheticGraph> synthetic;
  DistillConfig config;
  std::size_t nodes = 0;
  double wall_seconds = 0.0;
};

// Observer hook fired around each update step; `model` is that iteration's
// randomly initialized network.
struct IterationEvent {
  enum class Phase { before_update, after_update };
  std::size_t iteration = 0;
  Phase phase = Phase::before_update;
  const ModelParams* model = nullptr;
  const LossBreakdown* loss = nullptr;
  const std::vector<SyntheticGraph>* synthetic = nullptr;
};

using IterationObserver = std::function<void(const IterationEvent&)>;

// Fixed-network objective for one iteration; exposed for gradient checks.
struct IterationLoss {
  Var total;
  LossBreakdown breakdown;
};

IterationLoss distillation_loss(const GraphDataset& dataset, const std::vector<ClassBatch>& batches,
                                const std::vector<SyntheticGraph>& synthetic,
                                const ModelParams& model, const DistillConfig& config);

DistillReport distill(const GraphDataset& dataset, const DistillConfig& config,
                      const IterationObserver& observer = {});

// Binarized copies: A_ij = 1 iff sigmoid(logit_ij) > threshold.
std::vector<Graph> binarize(const std::vector<SyntheticGraph>& synthetic, double threshold = 0.5);

// Synthetic-set JSON: {"num_classes", "config", "graphs": [{"label",
// "features", "logits", "adjacency"}]}. Loadable by load_json_dataset.
nlohmann::json synthetic_to_json(const std::vector<SyntheticGraph>& synthetic, int num_classes,
                                 const nlohmann::json& config, double threshold = 0.5);
void export_synthetic(const std::vector<SyntheticGraph>& synthetic, int num_classes,
                      const nlohmann::json& config, const std::filesystem::path& path,
                      double threshold = 0.5);
std::vector<SyntheticGraph> load_synthetic(const std::filesystem::path& path);

}  // namespace gstam
