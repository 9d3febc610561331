#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gstam/autodiff.hpp"
#include "gstam/graph_data.hpp"
#include "gstam/seeding.hpp"

namespace gstam {

enum class Arch { gcn, gin };

struct GnnConfig {
  Arch arch = Arch::gcn;
  std::size_t num_conv_layers = 3;
  std::size_t hidden_dim = 128;
  int num_classes = 2;

  // "GCN-3C", "GIN-3C", ...
  std::string name() const;
};

// Parses "gcn", "gcn2", "gcn-3c", "gin", ... (case-insensitive). The layer
// count defaults to `default_layers` when the name does not carry one.
GnnConfig parse_arch(const std::string& text, int num_classes, std::size_t hidden_dim = 128,
                     std::size_t default_layers = 3);

struct ConvLayer {
  Var weight;  // GCN weight, or first GIN MLP weight
  // GIN only.
  Var bias;
  Var weight2;
  Var bias2;
  Var eps;
};

struct ModelParams {
  GnnConfig config;
  std::size_t feature_dim = 0;
  std::vector<ConvLayer> conv;
  Var head_weight;  // hidden x C
  Var head_bias;    // 1 x C

  // Every tensor in a fixed order; used by optimizers and fingerprints.
  std::vector<Var> all() const;
  ModelParams clone(bool trainable) const;
};

struct LayerActivations {
  std::vector<Var> conv_maps;  // one m x u_l post-ReLU map per conv layer
  Var head_output;             // 1 x C, before any softmax
};

// Glorot-uniform weights, zero biases, GIN eps = 0. With trainable=false the
// tensors are graph constants and never receive gradients.
ModelParams init_params(const GnnConfig& config, std::size_t feature_dim, Rng& rng,
                        bool trainable = true);

// D^{-1/2} (A + I) D^{-1/2} with D the row sums of A + I.
Var normalize_adjacency(const Var& adjacency);
Tensor normalize_adjacency(const Tensor& adjacency);

// `adjacency` is the raw (hard or soft) adjacency without self-loops.
LayerActivations forward(const ModelParams& params, const Var& adjacency, const Var& features);
LayerActivations forward(const ModelParams& params, const Graph& graph);

// Class scores (logits) for a real graph.
Tensor predict(const ModelParams& params, const Graph& graph);
std::vector<double> softmax(const Tensor& logits);
int argmax(const Tensor& logits);

std::uint64_t params_fingerprint(const ModelParams& params);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& doc);

}  // namespace gstam
