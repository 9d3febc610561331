#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gstam/seeding.hpp"
#include "gstam/tensor.hpp"

namespace gstam {

// Undirected, unweighted graph with dense storage. Adjacency is binary,
// symmetric and has a zero diagonal; self-loops are added by the models.
struct Graph {
  Tensor adjacency;  // m x m
  Tensor features;   // m x d
  int label = 0;

  std::size_t node_count() const { return features.rows(); }
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

enum class SplitPart { train, val, test };

struct GraphDataset {
  std::string name;
  std::vector<Graph> graphs;
  int num_classes = 0;
  std::size_t feature_dim = 0;
  Split split;

  const std::vector<std::size_t>& part(SplitPart which) const;
  // Training-split indices carrying `label`, ascending.
  std::vector<std::size_t> class_members(int label, SplitPart which = SplitPart::train) const;
};

struct ClassBatch {
  int class_id = 0;
  std::vector<std::size_t> graph_indices;
};

// Throws FormatError if any graph breaks the Graph/GraphDataset invariants.
void validate(const GraphDataset& dataset);

// Reads `<dir>/<name>_{A,graph_indicator,graph_labels}.txt` and the optional
// node label / node attribute files. Node labels become one-hot features; with
// no node labels each node gets the single constant feature 1. Graph labels are
// remapped to 0..C-1 in ascending order of the raw label. The returned dataset
// has an empty split.
GraphDataset load_tu_dataset(const std::filesystem::path& dir, const std::string& name);

// Generic JSON format (0-indexed):
// {"num_classes": C, "graphs": [{"label": y, "features": [[...]],
//   "edges": [[i, j], ...]}], "splits": {"train": [...], ...}}
// A graph may give a dense "adjacency" matrix instead of "edges". Without
// "splits", a random 80/10/10 split is drawn with `split_seed`.
GraphDataset load_json_dataset(const std::filesystem::path& path, std::uint64_t split_seed = 0);

// Same format, but every graph is returned with no split applied. Per-graph
// "source_index" entries, when present, are appended to `source_indices`.
GraphDataset load_json_graphs(const std::filesystem::path& path,
                              std::vector<std::size_t>* source_indices = nullptr);

// Writes the JSON format above. `source_indices`, when given, is stored per
// graph so downstream tools can check where a subset came from.
void save_json_dataset(const GraphDataset& dataset, const std::filesystem::path& path,
                       const std::vector<std::size_t>* source_indices = nullptr);

// Deterministic shuffle then floor-sized val/test slices; remainder to train.
GraphDataset random_split(GraphDataset dataset, std::array<double, 3> fractions, std::uint64_t seed);
inline GraphDataset random_split(GraphDataset dataset, std::uint64_t seed) {
  return random_split(std::move(dataset), {0.8, 0.1, 0.1}, seed);
}

// Uniform sample without replacement from the class's training graphs; the
// whole class when it has fewer than `batch_size` members.
ClassBatch sample_class_batch(const GraphDataset& dataset, int class_id, std::size_t batch_size,
                              Rng& rng);

// Mean node count over a split, rounded to nearest, never below 2.
std::size_t mean_node_count(const GraphDataset& dataset, SplitPart which = SplitPart::train);

// Checksum over labels, adjacencies and features of every graph.
std::uint64_t dataset_fingerprint(const GraphDataset& dataset);

Graph make_graph(std::size_t nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                 Tensor features, int label);

}  // namespace gstam
