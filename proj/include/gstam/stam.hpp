#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "gstam/autodiff.hpp"
#include "gstam/gnn.hpp"

namespace gstam {

// u x u channel co-activation map (|f|^p)^T (|f|^p) of an m x u feature map.
// The node count m drops out, so graphs of different sizes are comparable.
Var attention_map(const Var& conv_map, double p);

// Row-major flatten, divided by its L2 norm; an all-zero map stays zero.
Var normalize_and_flatten(const Var& map);

// Sum over conv layers of the squared distance between the batch means of
// the normalized attention vectors of `real` and `synthetic`. The head output
// is not used. `per_layer`, when given, receives each layer's contribution.
Var stam_loss(std::span<const LayerActivations> real, std::span<const LayerActivations> synthetic,
              double p, std::vector<double>* per_layer = nullptr);

// Squared distance between the batch means of the head outputs.
Var reg_loss(std::span<const Var> real_heads, std::span<const Var> synthetic_heads);
Var reg_loss(std::span<const LayerActivations> real, std::span<const LayerActivations> synthetic);

struct LossBreakdown {
  double stam = 0.0;
  double reg = 0.0;
  double lambda = 0.0;
  double total = 0.0;
  std::vector<double> per_layer;
};

LossBreakdown total_loss(double stam, double reg, double lambda);

// Debug dump: [{"layer": l, "matrix": [[...]]}, ...] for one sample.
nlohmann::json attention_maps_to_json(const LayerActivations& acts, double p);

}  // namespace gstam
