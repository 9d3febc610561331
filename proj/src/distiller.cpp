#include "gstam/distiller.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gstam/coreset.hpp"
#include "gstam/errors.hpp"

namespace gstam {

using json = nlohmann::json;

std::string init_mode_name(InitMode mode) { return mode == InitMode::random ? "random" : "kcenter"; }

InitMode parse_init_mode(const std::string& text) {
  if (text == "random") return InitMode::random;
  if (text == "kcenter" || text == "k-center") return InitMode::kcenter;
  throw ConfigError("unknown init mode '" + text + "' (expected random or kcenter)");
}

void DistillConfig::validate() const {
  if (!(feature_lr >= 0.0) || !(adjacency_lr >= 0.0)) throw ConfigError("learning rates must be >= 0");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (graphs_per_class < 1) throw ConfigError("graphs per class must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(p > 0.0)) throw ConfigError("p must be > 0");
  if (real_batch_size < 1) throw ConfigError("real batch size must be >= 1");
  if (model.num_conv_layers < 1 || model.hidden_dim < 1) throw ConfigError("invalid model config");
}

json config_to_json(const DistillConfig& c) {
  return {{"graphs_per_class", c.graphs_per_class},
          {"iterations", c.iterations},
          {"feature_lr", c.feature_lr},
          {"adjacency_lr", c.adjacency_lr},
          {"lambda", c.lambda},
          {"p", c.p},
          {"real_batch_size", c.real_batch_size},
          {"init", init_mode_name(c.init)},
          {"seed", c.seed},
          {"model", {{"arch", c.model.arch == Arch::gcn ? "gcn" : "gin"},
                     {"num_conv_layers", c.model.num_conv_layers},
                     {"hidden_dim", c.model.hidden_dim}}}};
}

Tensor SyntheticGraph::logits() const {
  return ops::upper_to_symmetric(Var::constant(upper_logits.value()), node_count()).value();
}

Var soft_adjacency(const SyntheticGraph& graph) {
  return ops::upper_to_symmetric(ops::sigmoid(graph.upper_logits), graph.node_count());
}

namespace {

std::size_t upper_count(std::size_t n) { return n * (n - 1) / 2; }

SyntheticGraph random_synthetic(std::size_t n, std::size_t d, int label, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 0.1);
  Tensor features(n, d);
  for (double& v : features.values()) v = noise(rng);
  Tensor logits(1, upper_count(n));
  for (double& v : logits.values()) v = noise(rng);
  return {Var::parameter(std::move(features)), Var::parameter(std::move(logits)), label};
}

SyntheticGraph copy_of_real(const Graph& real, std::size_t n, std::size_t d) {
  Tensor features(n, d);
  const std::size_t rows = std::min(n, real.node_count());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < d; ++j) features(i, j) = real.features(i, j);
  }
  Tensor logits(1, upper_count(n));
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++k) {
      const bool edge = i < rows && j < rows && real.adjacency(i, j) != 0.0;
      logits[k] = edge ? 3.0 : -3.0;
    }
  }
  return {Var::parameter(std::move(features)), Var::parameter(std::move(logits)), real.label};
}

}  // namespace

std::vector<SyntheticGraph> init_synthetic(const GraphDataset& dataset, const DistillConfig& config,
                                           Rng& rng) {
  for (int c = 0; c < dataset.num_classes; ++c) {
    if (dataset.class_members(c).empty()) {
      throw ContractError("class " + std::to_string(c) + " has no training graphs");
    }
  }
  const std::size_t n = mean_node_count(dataset);
  const std::size_t d = dataset.feature_dim;
  std::vector<SyntheticGraph> out;
  if (config.init == InitMode::random) {
    for (int c = 0; c < dataset.num_classes; ++c) {
      for (std::size_t k = 0; k < config.graphs_per_class; ++k) {
        out.push_back(random_synthetic(n, d, c, rng));
      }
    }
    return out;
  }
  const EmbeddingTable table = raw_mean_embeddings(dataset);
  const std::vector<std::size_t> picks = select_kcenter(table, config.graphs_per_class);
  for (int c = 0; c < dataset.num_classes; ++c) {
    std::vector<std::size_t> mine;
    for (std::size_t idx : picks) {
      if (dataset.graphs[idx].label == c) mine.push_back(idx);
    }
    // Classes smaller than the budget reuse their picks in order.
    for (std::size_t k = 0; k < config.graphs_per_class; ++k) {
      out.push_back(copy_of_real(dataset.graphs[mine[k % mine.size()]], n, d));
    }
  }
  return out;
}

IterationLoss distillation_loss(const GraphDataset& dataset, const std::vector<ClassBatch>& batches,
                                const std::vector<SyntheticGraph>& synthetic,
                                const ModelParams& model, const DistillConfig& config) {
  IterationLoss out;
  Var stam_total;
  Var reg_total;
  std::vector<double> per_layer(model.conv.size(), 0.0);
  for (const ClassBatch& batch : batches) {
    std::vector<LayerActivations> real;
    real.reserve(batch.graph_indices.size());
    for (std::size_t idx : batch.graph_indices) real.push_back(forward(model, dataset.graphs[idx]));
    std::vector<LayerActivations> syn;
    for (const SyntheticGraph& g : synthetic) {
      if (g.label == batch.class_id) syn.push_back(forward(model, soft_adjacency(g), g.features));
    }
    if (syn.empty()) continue;
    std::vector<double> layer_terms;
    const Var s = stam_loss(real, syn, config.p, &layer_terms);
    const Var r = reg_loss(real, syn);
    for (std::size_t l = 0; l < layer_terms.size(); ++l) per_layer[l] += layer_terms[l];
    stam_total = stam_total ? ops::add(stam_total, s) : s;
    reg_total = reg_total ? ops::add(reg_total, r) : r;
  }
  if (!stam_total) throw ContractError("distillation_loss: no class has synthetic graphs");
  out.total = ops::add(stam_total, ops::scale(reg_total, config.lambda));
  out.breakdown = total_loss(stam_total.item(), reg_total.item(), config.lambda);
  out.breakdown.per_layer = std::move(per_layer);
  return out;
}

DistillReport distill(const GraphDataset& dataset, const DistillConfig& config,
                      const IterationObserver& observer) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  DistillReport report;
  report.config = config;
  report.config.model.num_classes = dataset.num_classes;

  Rng init_rng(derive_seed(config.seed, "init"));
  report.synthetic = init_synthetic(dataset, config, init_rng);
  report.nodes = report.synthetic.front().node_count();

  std::vector<Var> features;
  std::vector<Var> logits;
  for (const SyntheticGraph& g : report.synthetic) {
    features.push_back(g.features);
    logits.push_back(g.upper_logits);
  }

  for (std::size_t t = 0; t < config.iterations; ++t) {
    Rng theta_rng(derive_seed(config.seed, "theta", t));
    const ModelParams model =
        init_params(report.config.model, dataset.feature_dim, theta_rng, /*trainable=*/false);
    Rng batch_rng(derive_seed(config.seed, "batch", t));
    std::vector<ClassBatch> batches;
    for (int c = 0; c < dataset.num_classes; ++c) {
      batches.push_back(sample_class_batch(dataset, c, config.real_batch_size, batch_rng));
    }
    IterationLoss loss = distillation_loss(dataset, batches, report.synthetic, model, config);
    if (!std::isfinite(loss.total.item())) {
      std::ostringstream msg;
      msg << "non-finite distillation loss at iteration " << t << " (stam=" << loss.breakdown.stam
          << ", reg=" << loss.breakdown.reg << ")";
      throw NumericError(msg.str());
    }
    if (observer) {
      observer({t, IterationEvent::Phase::before_update, &model, &loss.breakdown, &report.synthetic});
    }
    for (Var& v : features) v.zero_grad();
    for (Var& v : logits) v.zero_grad();
    backward(loss.total);
    sgd_step(features, config.feature_lr);
    sgd_step(logits, config.adjacency_lr);
    if (observer) {
      observer({t, IterationEvent::Phase::after_update, &model, &loss.breakdown, &report.synthetic});
    }
    report.loss_history.push_back(std::move(loss.breakdown));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::vector<Graph> binarize(const std::vector<SyntheticGraph>& synthetic, double threshold) {
  std::vector<Graph> out;
  for (const SyntheticGraph& s : synthetic) {
    const Tensor probs = soft_adjacency(s).value();
    const std::size_t n = s.node_count();
    Graph g;
    g.adjacency = Tensor(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (probs(i, j) > threshold) {
          g.adjacency(i, j) = 1.0;
          g.adjacency(j, i) = 1.0;
        }
      }
    }
    g.features = s.features.value();
    g.label = s.label;
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

json matrix_json(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor matrix_from_json(const json& rows, const std::string& where) {
  if (!rows.is_array() || rows.empty()) throw FormatError(where + ": expected non-empty matrix");
  const std::size_t cols = rows[0].size();
  std::vector<double> data;
  for (const json& row : rows) {
    if (!row.is_array() || row.size() != cols) throw FormatError(where + ": ragged matrix");
    for (const json& v : row) data.push_back(v.get<double>());
  }
  return Tensor::checked(rows.size(), cols, std::move(data));
}

}  // namespace

json synthetic_to_json(const std::vector<SyntheticGraph>& synthetic, int num_classes,
                       const json& config, double threshold) {
  json doc;
  doc["num_classes"] = num_classes;
  doc["config"] = config;
  doc["config"]["threshold"] = threshold;
  const std::vector<Graph> hard = binarize(synthetic, threshold);
  json graphs = json::array();
  for (std::size_t k = 0; k < synthetic.size(); ++k) {
    graphs.push_back({{"label", synthetic[k].label},
                      {"features", matrix_json(synthetic[k].features.value())},
                      {"logits", matrix_json(synthetic[k].logits())},
                      {"adjacency", matrix_json(hard[k].adjacency)}});
  }
  doc["graphs"] = std::move(graphs);
  return doc;
}

void export_synthetic(const std::vector<SyntheticGraph>& synthetic, int num_classes,
                      const json& config, const std::filesystem::path& path, double threshold) {
  std::ofstream out(path);
  if (!out) throw ExportError("cannot write " + path.string());
  out << synthetic_to_json(synthetic, num_classes, config, threshold).dump(1) << '\n';
  if (!out) throw ExportError("write failed for " + path.string());
}

std::vector<SyntheticGraph> load_synthetic(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open synthetic set " + path.string());
  json doc;
  try {
    in >> doc;
    std::vector<SyntheticGraph> out;
    const json& graphs = doc.at("graphs");
    for (std::size_t k = 0; k < graphs.size(); ++k) {
      const std::string where = path.string() + ": graph " + std::to_string(k);
      Tensor features = matrix_from_json(graphs[k].at("features"), where + " features");
      const Tensor logits = matrix_from_json(graphs[k].at("logits"), where + " logits");
      const std::size_t n = features.rows();
      if (logits.rows() != n || logits.cols() != n) throw FormatError(where + ": logits shape");
      Tensor upper(1, upper_count(n));
      std::size_t u = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) upper[u++] = logits(i, j);
      }
      out.push_back({Var::parameter(std::move(features)), Var::parameter(std::move(upper)),
                     graphs[k].at("label").get<int>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

}  // namespace gstam
