#include "gstam/stam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gstam/errors.hpp"

namespace gstam {

Var attention_map(const Var& conv_map, double p) {
  if (!(p > 0.0)) throw ContractError("attention_map: p must be positive");
  if (!conv_map.value().all_finite()) throw NumericError("attention_map: non-finite feature map");
  // |f^T|^p = (|f|^p)^T, so one elementwise pass serves both factors.
  const Var powered = ops::pow(ops::abs(conv_map), p);
  // Rows go through the Gram product in sorted order, which makes the map
  // bitwise independent of the node order.
  const Tensor& pv = powered.value();
  const std::size_t u = pv.cols();
  std::vector<std::size_t> order(pv.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto row = [&](std::size_t r) { return pv.storage().begin() + static_cast<std::ptrdiff_t>(r * u); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(row(a), row(a) + static_cast<std::ptrdiff_t>(u), row(b),
                                        row(b) + static_cast<std::ptrdiff_t>(u));
  });
  const Var sorted = ops::gather_rows(powered, order);
  return ops::matmul(ops::transpose(sorted), sorted);
}

Var normalize_and_flatten(const Var& map) {
  const Var flat = ops::flatten(map);
  const Var norm = ops::l2_norm(flat);
  if (norm.item() == 0.0) return ops::scale(flat, 0.0);
  return ops::div(flat, norm);
}

namespace {

Var batch_mean(std::span<const Var> rows) {
  Var total = rows.front();
  for (std::size_t i = 1; i < rows.size(); ++i) total = ops::add(total, rows[i]);
  return ops::scale(total, 1.0 / static_cast<double>(rows.size()));
}

Var squared_distance(const Var& a, const Var& b) {
  return ops::sum(ops::pow(ops::sub(a, b), 2.0));
}

}  // namespace

Var stam_loss(std::span<const LayerActivations> real, std::span<const LayerActivations> synthetic,
              double p, std::vector<double>* per_layer) {
  if (real.empty() || synthetic.empty()) throw ContractError("stam_loss: empty batch");
  const std::size_t layers = real.front().conv_maps.size();
  const auto check = [&](const LayerActivations& acts) {
    if (acts.conv_maps.size() != layers) throw ContractError("stam_loss: layer count mismatch");
    for (std::size_t l = 0; l < layers; ++l) {
      if (acts.conv_maps[l].cols() != real.front().conv_maps[l].cols()) {
        throw ContractError("stam_loss: width mismatch at layer " + std::to_string(l + 1));
      }
    }
  };
  for (const auto& a : real) check(a);
  for (const auto& a : synthetic) check(a);
  if (layers == 0) throw ContractError("stam_loss: no conv layers");

  if (per_layer) per_layer->clear();
  Var total;
  std::vector<Var> real_vecs(real.size());
  std::vector<Var> syn_vecs(synthetic.size());
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t i = 0; i < real.size(); ++i) {
      real_vecs[i] = normalize_and_flatten(attention_map(real[i].conv_maps[l], p));
    }
    for (std::size_t i = 0; i < synthetic.size(); ++i) {
      syn_vecs[i] = normalize_and_flatten(attention_map(synthetic[i].conv_maps[l], p));
    }
    const Var term = squared_distance(batch_mean(real_vecs), batch_mean(syn_vecs));
    if (per_layer) per_layer->push_back(term.item());
    total = total ? ops::add(total, term) : term;
  }
  return total;
}

Var reg_loss(std::span<const Var> real_heads, std::span<const Var> synthetic_heads) {
  if (real_heads.empty() || synthetic_heads.empty()) throw ContractError("reg_loss: empty batch");
  const std::size_t width = real_heads.front().cols();
  for (const auto* batch : {&real_heads, &synthetic_heads}) {
    for (const Var& h : *batch) {
      if (h.rows() != 1 || h.cols() != width) {
        throw ContractError("reg_loss: head output width mismatch");
      }
    }
  }
  return squared_distance(batch_mean(real_heads), batch_mean(synthetic_heads));
}

Var reg_loss(std::span<const LayerActivations> real, std::span<const LayerActivations> synthetic) {
  std::vector<Var> r;
  std::vector<Var> s;
  for (const auto& a : real) r.push_back(a.head_output);
  for (const auto& a : synthetic) s.push_back(a.head_output);
  return reg_loss(r, s);
}

LossBreakdown total_loss(double stam, double reg, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("total_loss: lambda must be >= 0");
  LossBreakdown out;
  out.stam = stam;
  out.reg = reg;
  out.lambda = lambda;
  out.total = stam + lambda * reg;
  return out;
}

nlohmann::json attention_maps_to_json(const LayerActivations& acts, double p) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t l = 0; l < acts.conv_maps.size(); ++l) {
    const Tensor map = attention_map(acts.conv_maps[l], p).value();
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < map.rows(); ++r) {
      rows.push_back(std::vector<double>(map.values().begin() + static_cast<std::ptrdiff_t>(r * map.cols()),
                                         map.values().begin() + static_cast<std::ptrdiff_t>((r + 1) * map.cols())));
    }
    out.push_back({{"layer", l + 1}, {"matrix", std::move(rows)}});
  }
  return out;
}

}  // namespace gstam
