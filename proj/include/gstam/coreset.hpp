#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gstam/evaluation.hpp"
#include "gstam/gnn.hpp"
#include "gstam/graph_data.hpp"

namespace gstam {

// One embedding row per training graph, with that graph's dataset index and label.
struct EmbeddingTable {
  Tensor rows;
  std::vector<std::size_t> graph_indices;
  std::vector<int> labels;
};

// Mean of each training graph's raw node features.
EmbeddingTable raw_mean_embeddings(const GraphDataset& dataset);

// Mean-pooled last conv layer of a GNN trained on the whole training split.
EmbeddingTable trained_embeddings(const GraphDataset& dataset, const GnnConfig& arch,
                                  const TrainOptions& options, std::uint64_t seed);

// All selectors return dataset indices grouped by ascending class, at most
// per_class per class.
std::vector<std::size_t> select_random(const GraphDataset& dataset, std::size_t per_class,
                                       std::uint64_t seed);

// Greedy: each step adds the graph whose inclusion brings the selected mean
// closest to the class mean. Lowest row wins ties.
std::vector<std::size_t> select_herding(const EmbeddingTable& table, std::size_t per_class);

// Farthest-first traversal seeded at the row nearest the class mean.
std::vector<std::size_t> select_kcenter(const EmbeddingTable& table, std::size_t per_class);

}  // namespace gstam
