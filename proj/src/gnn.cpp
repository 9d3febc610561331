#include "gstam/gnn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gstam/errors.hpp"

namespace gstam {

using json = nlohmann::json;

std::string GnnConfig::name() const {
  return std::string(arch == Arch::gcn ? "GCN-" : "GIN-") + std::to_string(num_conv_layers) + "C";
}

GnnConfig parse_arch(const std::string& text, int num_classes, std::size_t hidden_dim,
                     std::size_t default_layers) {
  std::string s;
  for (char ch : text) {
    if (ch != '-' && ch != '_') s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  GnnConfig cfg;
  cfg.num_classes = num_classes;
  cfg.hidden_dim = hidden_dim;
  cfg.num_conv_layers = default_layers;
  std::string rest;
  if (s.rfind("gcn", 0) == 0) {
    cfg.arch = Arch::gcn;
    rest = s.substr(3);
  } else if (s.rfind("gin", 0) == 0) {
    cfg.arch = Arch::gin;
    rest = s.substr(3);
  } else {
    throw ConfigError("unknown architecture '" + text + "' (expected gcn[N][c] or gin[N][c])");
  }
  if (!rest.empty() && rest.back() == 'c') rest.pop_back();
  if (!rest.empty()) {
    if (!std::all_of(rest.begin(), rest.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      throw ConfigError("unknown architecture '" + text + "'");
    }
    cfg.num_conv_layers = std::stoul(rest);
  }
  if (cfg.num_conv_layers < 1) throw ConfigError("architecture needs at least one conv layer");
  return cfg;
}

std::vector<Var> ModelParams::all() const {
  std::vector<Var> out;
  for (const ConvLayer& layer : conv) {
    for (const Var* v : {&layer.weight, &layer.bias, &layer.weight2, &layer.bias2, &layer.eps}) {
      if (*v) out.push_back(*v);
    }
  }
  out.push_back(head_weight);
  out.push_back(head_bias);
  return out;
}

ModelParams ModelParams::clone(bool trainable) const {
  const auto copy = [trainable](const Var& v) {
    if (!v) return Var();
    return trainable ? Var::parameter(v.value()) : Var::constant(v.value());
  };
  ModelParams out;
  out.config = config;
  out.feature_dim = feature_dim;
  for (const ConvLayer& layer : conv) {
    out.conv.push_back({copy(layer.weight), copy(layer.bias), copy(layer.weight2),
                        copy(layer.bias2), copy(layer.eps)});
  }
  out.head_weight = copy(head_weight);
  out.head_bias = copy(head_bias);
  return out;
}

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(fan_in, fan_out);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

ModelParams init_params(const GnnConfig& config, std::size_t feature_dim, Rng& rng,
                        bool trainable) {
  if (feature_dim < 1) throw ContractError("init_params: feature_dim must be >= 1");
  if (config.num_conv_layers < 1 || config.hidden_dim < 1 || config.num_classes < 1) {
    throw ConfigError("init_params: invalid GNN configuration");
  }
  const auto wrap = [trainable](Tensor t) {
    return trainable ? Var::parameter(std::move(t)) : Var::constant(std::move(t));
  };
  ModelParams p;
  p.config = config;
  p.feature_dim = feature_dim;
  std::size_t in = feature_dim;
  const std::size_t h = config.hidden_dim;
  for (std::size_t l = 0; l < config.num_conv_layers; ++l) {
    ConvLayer layer;
    layer.weight = wrap(glorot(in, h, rng));
    if (config.arch == Arch::gin) {
      layer.bias = wrap(Tensor(1, h));
      layer.weight2 = wrap(glorot(h, h, rng));
      layer.bias2 = wrap(Tensor(1, h));
      layer.eps = wrap(Tensor::scalar(0.0));
    }
    p.conv.push_back(std::move(layer));
    in = h;
  }
  const auto c = static_cast<std::size_t>(config.num_classes);
  p.head_weight = wrap(glorot(h, c, rng));
  p.head_bias = wrap(Tensor(1, c));
  return p;
}

Var normalize_adjacency(const Var& adjacency) {
  const std::size_t m = adjacency.rows();
  if (adjacency.cols() != m) throw DimensionError("normalize_adjacency: matrix not square");
  const Var with_loops = ops::add(adjacency, Var::constant(Tensor::identity(m)));
  const Var inv_sqrt_deg = ops::pow(ops::sum(with_loops, Axis::cols), -0.5);
  const Var scaling = ops::matmul(inv_sqrt_deg, ops::transpose(inv_sqrt_deg));
  return ops::mul(with_loops, scaling);
}

Tensor normalize_adjacency(const Tensor& adjacency) {
  return normalize_adjacency(Var::constant(adjacency)).value();
}

LayerActivations forward(const ModelParams& params, const Var& adjacency, const Var& features) {
  const std::size_t m = features.rows();
  if (features.cols() != params.feature_dim) {
    throw ContractError("forward: feature width " + std::to_string(features.cols()) +
                        " but model expects " + std::to_string(params.feature_dim));
  }
  if (adjacency.rows() != m || adjacency.cols() != m) {
    throw ContractError("forward: adjacency " + adjacency.value().shape_string() +
                        " does not match " + std::to_string(m) + " nodes");
  }
  LayerActivations acts;
  Var h = features;
  if (params.config.arch == Arch::gcn) {
    const Var propagate = normalize_adjacency(adjacency);
    for (const ConvLayer& layer : params.conv) {
      // Multiply in whichever order keeps the m x m product on the narrower side.
      const bool project_first = layer.weight.cols() <= layer.weight.rows();
      const Var mixed = project_first ? ops::matmul(propagate, ops::matmul(h, layer.weight))
                                      : ops::matmul(ops::matmul(propagate, h), layer.weight);
      h = ops::relu(mixed);
      acts.conv_maps.push_back(h);
    }
  } else {
    for (const ConvLayer& layer : params.conv) {
      const Var self_term = ops::add(h, ops::mul(layer.eps, h));
      const Var combined = ops::add(self_term, ops::matmul(adjacency, h));
      const Var hidden = ops::relu(ops::add_row(ops::matmul(combined, layer.weight), layer.bias));
      h = ops::relu(ops::add_row(ops::matmul(hidden, layer.weight2), layer.bias2));
      acts.conv_maps.push_back(h);
    }
  }
  const Var pooled = ops::mean(h, Axis::rows);
  acts.head_output = ops::add_row(ops::matmul(pooled, params.head_weight), params.head_bias);
  return acts;
}

LayerActivations forward(const ModelParams& params, const Graph& graph) {
  return forward(params, Var::constant(graph.adjacency), Var::constant(graph.features));
}

Tensor predict(const ModelParams& params, const Graph& graph) {
  return forward(params, graph).head_output.value();
}

std::vector<double> softmax(const Tensor& logits) {
  std::vector<double> out(logits.values().begin(), logits.values().end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

int argmax(const Tensor& logits) {
  const auto vals = logits.values();
  return static_cast<int>(std::max_element(vals.begin(), vals.end()) - vals.begin());
}

std::uint64_t params_fingerprint(const ModelParams& params) {
  Fnv1a h;
  for (const Var& v : params.all()) {
    h.update(static_cast<std::uint64_t>(v.rows()));
    h.update(static_cast<std::uint64_t>(v.cols()));
    for (double x : v.value().values()) h.update(x);
  }
  return h.digest();
}

namespace {

json tensor_to_json(const Tensor& t) {
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.storage()}};
}

Tensor tensor_from_json(const json& j) {
  return Tensor::checked(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                         j.at("data").get<std::vector<double>>());
}

}  // namespace

json params_to_json(const ModelParams& params) {
  json doc;
  doc["config"] = {{"arch", params.config.arch == Arch::gcn ? "gcn" : "gin"},
                   {"num_conv_layers", params.config.num_conv_layers},
                   {"hidden_dim", params.config.hidden_dim},
                   {"num_classes", params.config.num_classes},
                   {"feature_dim", params.feature_dim}};
  json weights = json::array();
  for (const Var& v : params.all()) weights.push_back(tensor_to_json(v.value()));
  doc["weights"] = std::move(weights);
  return doc;
}

ModelParams params_from_json(const json& doc) {
  try {
    const json& c = doc.at("config");
    GnnConfig cfg;
    cfg.arch = c.at("arch").get<std::string>() == "gin" ? Arch::gin : Arch::gcn;
    cfg.num_conv_layers = c.at("num_conv_layers").get<std::size_t>();
    cfg.hidden_dim = c.at("hidden_dim").get<std::size_t>();
    cfg.num_classes = c.at("num_classes").get<int>();
    Rng unused(0);
    ModelParams p = init_params(cfg, c.at("feature_dim").get<std::size_t>(), unused);
    std::vector<Var> slots = p.all();
    const json& w = doc.at("weights");
    if (w.size() != slots.size()) throw FormatError("checkpoint weight count mismatch");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      Tensor t = tensor_from_json(w[i]);
      if (!t.same_shape(slots[i].value())) throw FormatError("checkpoint weight shape mismatch");
      slots[i].mutable_value() = std::move(t);
    }
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace gstam
