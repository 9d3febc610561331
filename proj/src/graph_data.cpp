#include "gstam/graph_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gstam/errors.hpp"

namespace gstam {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::size_t>& GraphDataset::part(SplitPart which) const {
  switch (which) {
    case SplitPart::train:
      return split.train;
    case SplitPart::val:
      return split.val;
    case SplitPart::test:
      return split.test;
  }
  return split.train;
}

std::vector<std::size_t> GraphDataset::class_members(int label, SplitPart which) const {
  std::vector<std::size_t> out;
  for (std::size_t idx : part(which)) {
    if (graphs[idx].label == label) out.push_back(idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Graph make_graph(std::size_t nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                 Tensor features, int label) {
  Graph g;
  g.adjacency = Tensor(nodes, nodes);
  for (auto [i, j] : edges) {
    if (i >= nodes || j >= nodes) {
      throw FormatError("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") outside a graph of " + std::to_string(nodes) + " nodes");
    }
    if (i == j) continue;
    g.adjacency(i, j) = 1.0;
    g.adjacency(j, i) = 1.0;
  }
  g.features = std::move(features);
  g.label = label;
  return g;
}

void validate(const GraphDataset& dataset) {
  for (std::size_t k = 0; k < dataset.graphs.size(); ++k) {
    const Graph& g = dataset.graphs[k];
    const std::string where = "graph " + std::to_string(k);
    const std::size_t m = g.node_count();
    if (g.adjacency.rows() != m || g.adjacency.cols() != m) {
      throw FormatError(where + ": adjacency " + g.adjacency.shape_string() +
                        " does not match " + std::to_string(m) + " nodes");
    }
    if (g.features.cols() != dataset.feature_dim) {
      throw FormatError(where + ": feature width " + std::to_string(g.features.cols()) +
                        " differs from dataset width " + std::to_string(dataset.feature_dim));
    }
    if (g.label < 0 || g.label >= dataset.num_classes) {
      throw FormatError(where + ": label " + std::to_string(g.label) + " outside 0.." +
                        std::to_string(dataset.num_classes - 1));
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (g.adjacency(i, i) != 0.0) throw FormatError(where + ": nonzero adjacency diagonal");
      for (std::size_t j = i + 1; j < m; ++j) {
        if (g.adjacency(i, j) != g.adjacency(j, i)) {
          throw FormatError(where + ": adjacency not symmetric");
        }
      }
    }
  }
  std::set<std::size_t> seen;
  for (const auto* part : {&dataset.split.train, &dataset.split.val, &dataset.split.test}) {
    for (std::size_t idx : *part) {
      if (idx >= dataset.graphs.size()) {
        throw FormatError("split index " + std::to_string(idx) + " out of range");
      }
      if (!seen.insert(idx).second) {
        throw FormatError("split index " + std::to_string(idx) + " appears twice");
      }
    }
  }
}

namespace {

std::ifstream open_required(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestionError("cannot open required file " + file.string());
  return in;
}

// Reads one comma/space separated row of numbers per line, skipping blanks.
// Each returned entry carries its 1-based line number.
template <class T>
std::vector<std::pair<std::size_t, std::vector<T>>> read_rows(const fs::path& file) {
  std::ifstream in = open_required(file);
  std::vector<std::pair<std::size_t, std::vector<T>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::vector<T> values;
    T v;
    while (ss >> v) values.push_back(v);
    if (!ss.eof()) {
      throw FormatError(file.filename().string() + ":" + std::to_string(line_no) +
                        ": unparseable value");
    }
    if (values.empty()) continue;
    rows.emplace_back(line_no, std::move(values));
  }
  return rows;
}

}  // namespace

GraphDataset load_tu_dataset(const fs::path& dir, const std::string& name) {
  if (!fs::is_directory(dir)) throw IngestionError("dataset directory not found: " + dir.string());
  const auto file = [&](const char* suffix) { return dir / (name + suffix); };

  const auto indicator_rows = read_rows<long long>(file("_graph_indicator.txt"));
  const auto label_rows = read_rows<long long>(file("_graph_labels.txt"));
  const auto edge_rows = read_rows<long long>(file("_A.txt"));

  const std::size_t num_graphs = label_rows.size();
  const std::size_t num_nodes = indicator_rows.size();
  if (num_graphs == 0) throw FormatError(file("_graph_labels.txt").string() + ": no graphs");

  // Graph membership and per-graph local node ids.
  std::vector<std::size_t> graph_of(num_nodes);
  std::vector<std::size_t> local_id(num_nodes);
  std::vector<std::size_t> sizes(num_graphs, 0);
  for (std::size_t n = 0; n < num_nodes; ++n) {
    const auto& [line, vals] = indicator_rows[n];
    if (vals.size() != 1 || vals[0] < 1 || static_cast<std::size_t>(vals[0]) > num_graphs) {
      throw FormatError(name + "_graph_indicator.txt:" + std::to_string(line) +
                        ": graph id out of range");
    }
    graph_of[n] = static_cast<std::size_t>(vals[0] - 1);
    local_id[n] = sizes[graph_of[n]]++;
  }

  std::map<long long, int> label_map;
  for (const auto& [line, vals] : label_rows) label_map.emplace(vals.at(0), 0);
  int next = 0;
  for (auto& [raw, mapped] : label_map) mapped = next++;

  // Node features: one-hot node labels, then raw node attributes.
  std::vector<std::vector<double>> node_feats(num_nodes);
  std::size_t width = 0;
  if (fs::exists(file("_node_labels.txt"))) {
    const auto nl_rows = read_rows<long long>(file("_node_labels.txt"));
    if (nl_rows.size() != num_nodes) {
      throw FormatError(name + "_node_labels.txt: " + std::to_string(nl_rows.size()) +
                        " rows for " + std::to_string(num_nodes) + " nodes");
    }
    std::map<long long, std::size_t> codes;
    for (const auto& [line, vals] : nl_rows) codes.emplace(vals.at(0), 0);
    std::size_t c = 0;
    for (auto& [raw, code] : codes) code = c++;
    width = codes.size();
    for (std::size_t n = 0; n < num_nodes; ++n) {
      node_feats[n].assign(width, 0.0);
      node_feats[n][codes.at(nl_rows[n].second[0])] = 1.0;
    }
  }
  if (fs::exists(file("_node_attributes.txt"))) {
    const auto attr_rows = read_rows<double>(file("_node_attributes.txt"));
    if (attr_rows.size() != num_nodes) {
      throw FormatError(name + "_node_attributes.txt: " + std::to_string(attr_rows.size()) +
                        " rows for " + std::to_string(num_nodes) + " nodes");
    }
    const std::size_t attr_width = attr_rows.front().second.size();
    for (std::size_t n = 0; n < num_nodes; ++n) {
      const auto& [line, vals] = attr_rows[n];
      if (vals.size() != attr_width) {
        throw FormatError(name + "_node_attributes.txt:" + std::to_string(line) +
                          ": inconsistent attribute count");
      }
      node_feats[n].insert(node_feats[n].end(), vals.begin(), vals.end());
    }
    width += attr_width;
  }
  if (width == 0) {
    width = 1;
    for (auto& f : node_feats) f.assign(1, 1.0);
  }
  if (fs::exists(file("_edge_labels.txt")) || fs::exists(file("_edge_attributes.txt"))) {
    std::cerr << "warning: " << name << ": edge labels/attributes are ignored\n";
  }

  GraphDataset ds;
  ds.name = name;
  ds.num_classes = static_cast<int>(label_map.size());
  ds.feature_dim = width;
  ds.graphs.resize(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    ds.graphs[g].adjacency = Tensor(sizes[g], sizes[g]);
    ds.graphs[g].features = Tensor(sizes[g], width);
    ds.graphs[g].label = label_map.at(label_rows[g].second[0]);
  }
  for (std::size_t n = 0; n < num_nodes; ++n) {
    Graph& g = ds.graphs[graph_of[n]];
    std::copy(node_feats[n].begin(), node_feats[n].end(),
              g.features.values().begin() + static_cast<std::ptrdiff_t>(local_id[n] * width));
  }
  for (const auto& [line, vals] : edge_rows) {
    const std::string where = name + "_A.txt:" + std::to_string(line);
    if (vals.size() != 2) throw FormatError(where + ": expected two node ids");
    const long long a = vals[0] - 1;
    const long long b = vals[1] - 1;
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= num_nodes ||
        static_cast<std::size_t>(b) >= num_nodes) {
      throw FormatError(where + ": edge endpoint refers to unknown node");
    }
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    if (graph_of[ua] != graph_of[ub]) {
      throw FormatError(where + ": edge connects nodes of different graphs");
    }
    if (ua == ub) continue;
    Graph& g = ds.graphs[graph_of[ua]];
    g.adjacency(local_id[ua], local_id[ub]) = 1.0;
    g.adjacency(local_id[ub], local_id[ua]) = 1.0;
  }
  validate(ds);
  return ds;
}

namespace {

[[noreturn]] void schema_error(const std::string& pointer, const std::string& what) {
  throw IngestionError("JSON schema violation at " + pointer + ": " + what);
}

Tensor parse_matrix(const json& node, const std::string& pointer, std::size_t expected_cols,
                    bool check_cols) {
  if (!node.is_array()) schema_error(pointer, "expected array of rows");
  const std::size_t rows = node.size();
  std::size_t cols = check_cols ? expected_cols : (rows ? node[0].size() : 0);
  std::vector<double> data;
  data.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = node[r];
    const std::string rp = pointer + "/" + std::to_string(r);
    if (!row.is_array()) schema_error(rp, "expected array of numbers");
    if (row.size() != cols) {
      schema_error(rp, "row has " + std::to_string(row.size()) + " entries, expected " +
                           std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) schema_error(rp + "/" + std::to_string(c), "expected number");
      const double v = row[c].get<double>();
      if (!std::isfinite(v)) schema_error(rp + "/" + std::to_string(c), "non-finite value");
      data.push_back(v);
    }
  }
  return Tensor(rows, cols, std::move(data));
}

}  // namespace

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open dataset file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw IngestionError(path.string() + ": invalid JSON: " + e.what());
  }
  return doc;
}

GraphDataset parse_graphs(const json& doc, const std::string& name,
                          std::vector<std::size_t>* source_indices) {
  if (!doc.is_object()) schema_error("", "expected object");
  if (!doc.contains("num_classes") || !doc["num_classes"].is_number_integer()) {
    schema_error("/num_classes", "expected integer");
  }
  if (!doc.contains("graphs") || !doc["graphs"].is_array()) schema_error("/graphs", "expected array");

  GraphDataset ds;
  ds.name = name;
  ds.num_classes = doc["num_classes"].get<int>();
  if (ds.num_classes < 1) schema_error("/num_classes", "must be positive");
  const json& graphs = doc["graphs"];
  std::optional<std::size_t> width;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const json& gj = graphs[k];
    const std::string gp = "/graphs/" + std::to_string(k);
    if (!gj.is_object()) schema_error(gp, "expected object");
    if (!gj.contains("label") || !gj["label"].is_number_integer()) {
      schema_error(gp + "/label", "expected integer");
    }
    const int label = gj["label"].get<int>();
    if (label < 0 || label >= ds.num_classes) schema_error(gp + "/label", "label out of range");
    if (!gj.contains("features")) schema_error(gp + "/features", "missing");
    const json& fj = gj["features"];
    if (!fj.is_array() || fj.empty()) schema_error(gp + "/features", "expected non-empty matrix");
    if (!fj[0].is_array()) schema_error(gp + "/features/0", "expected array of numbers");
    if (!width) width = fj[0].size();
    if (fj[0].size() != *width) {
      schema_error(gp + "/features", "graph " + std::to_string(k) + " has feature width " +
                                         std::to_string(fj[0].size()) + ", expected " +
                                         std::to_string(*width));
    }
    Tensor features = parse_matrix(fj, gp + "/features", *width, true);
    const std::size_t m = features.rows();

    Graph g;
    if (gj.contains("adjacency")) {
      Tensor adj = parse_matrix(gj["adjacency"], gp + "/adjacency", m, true);
      if (adj.rows() != m) schema_error(gp + "/adjacency", "row count differs from node count");
      std::vector<std::pair<std::size_t, std::size_t>> edges;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          const double a = adj(i, j);
          if (a != 0.0 && a != 1.0) schema_error(gp + "/adjacency", "entries must be 0 or 1");
          if (a == 1.0) edges.emplace_back(i, j);
        }
      }
      g = make_graph(m, edges, std::move(features), label);
    } else {
      std::vector<std::pair<std::size_t, std::size_t>> edges;
      if (gj.contains("edges")) {
        const json& ej = gj["edges"];
        if (!ej.is_array()) schema_error(gp + "/edges", "expected array of pairs");
        for (std::size_t e = 0; e < ej.size(); ++e) {
          const std::string ep = gp + "/edges/" + std::to_string(e);
          if (!ej[e].is_array() || ej[e].size() != 2 || !ej[e][0].is_number_unsigned() ||
              !ej[e][1].is_number_unsigned()) {
            schema_error(ep, "expected [i, j] with non-negative integers");
          }
          const auto i = ej[e][0].get<std::size_t>();
          const auto j = ej[e][1].get<std::size_t>();
          if (i >= m || j >= m) schema_error(ep, "endpoint outside node range");
          edges.emplace_back(i, j);
        }
      }
      g = make_graph(m, edges, std::move(features), label);
    }
    if (source_indices && gj.contains("source_index")) {
      if (!gj["source_index"].is_number_unsigned()) {
        schema_error(gp + "/source_index", "expected non-negative integer");
      }
      source_indices->push_back(gj["source_index"].get<std::size_t>());
    }
    ds.graphs.push_back(std::move(g));
  }
  ds.feature_dim = width.value_or(0);
  return ds;
}

}  // namespace

GraphDataset load_json_graphs(const fs::path& path, std::vector<std::size_t>* source_indices) {
  GraphDataset ds = parse_graphs(read_json_file(path), path.stem().string(), source_indices);
  validate(ds);
  return ds;
}

GraphDataset load_json_dataset(const fs::path& path, std::uint64_t split_seed) {
  const json doc = read_json_file(path);
  GraphDataset ds = parse_graphs(doc, path.stem().string(), nullptr);

  if (doc.contains("splits")) {
    const json& sj = doc["splits"];
    if (!sj.is_object()) schema_error("/splits", "expected object");
    const auto read_part = [&](const char* key, std::vector<std::size_t>& out) {
      if (!sj.contains(key)) return;
      const json& arr = sj[key];
      const std::string sp = std::string("/splits/") + key;
      if (!arr.is_array()) schema_error(sp, "expected array of indices");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number_unsigned() || arr[i].get<std::size_t>() >= ds.graphs.size()) {
          schema_error(sp + "/" + std::to_string(i), "invalid graph index");
        }
        out.push_back(arr[i].get<std::size_t>());
      }
    };
    read_part("train", ds.split.train);
    read_part("val", ds.split.val);
    read_part("test", ds.split.test);
    validate(ds);
    return ds;
  }
  validate(ds);
  return random_split(std::move(ds), split_seed);
}

void save_json_dataset(const GraphDataset& dataset, const fs::path& path,
                       const std::vector<std::size_t>* source_indices) {
  json doc;
  doc["num_classes"] = dataset.num_classes;
  json graphs = json::array();
  for (std::size_t k = 0; k < dataset.graphs.size(); ++k) {
    const Graph& g = dataset.graphs[k];
    json gj;
    gj["label"] = g.label;
    json feats = json::array();
    for (std::size_t r = 0; r < g.features.rows(); ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < g.features.cols(); ++c) row.push_back(g.features(r, c));
      feats.push_back(std::move(row));
    }
    gj["features"] = std::move(feats);
    json edges = json::array();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      for (std::size_t j = i + 1; j < g.node_count(); ++j) {
        if (g.adjacency(i, j) != 0.0) edges.push_back({i, j});
      }
    }
    gj["edges"] = std::move(edges);
    if (source_indices) gj["source_index"] = source_indices->at(k);
    graphs.push_back(std::move(gj));
  }
  doc["graphs"] = std::move(graphs);
  if (!dataset.split.train.empty() || !dataset.split.val.empty() || !dataset.split.test.empty()) {
    doc["splits"] = {{"train", dataset.split.train},
                     {"val", dataset.split.val},
                     {"test", dataset.split.test}};
  }
  std::ofstream out(path);
  if (!out) throw ExportError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw ExportError("write failed for " + path.string());
}

GraphDataset random_split(GraphDataset dataset, std::array<double, 3> fractions,
                          std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
  }
  if (std::fabs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const std::size_t n = dataset.graphs.size();
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions[1]));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions[2]));
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto take = [&](std::size_t from, std::size_t count) {
    std::vector<std::size_t> part(perm.begin() + static_cast<std::ptrdiff_t>(from),
                                  perm.begin() + static_cast<std::ptrdiff_t>(from + count));
    std::sort(part.begin(), part.end());
    return part;
  };
  dataset.split.train = take(0, n_train);
  dataset.split.val = take(n_train, n_val);
  dataset.split.test = take(n_train + n_val, n_test);
  return dataset;
}

ClassBatch sample_class_batch(const GraphDataset& dataset, int class_id, std::size_t batch_size,
                              Rng& rng) {
  if (class_id < 0 || class_id >= dataset.num_classes) {
    throw ContractError("unknown class " + std::to_string(class_id));
  }
  std::vector<std::size_t> members = dataset.class_members(class_id);
  if (members.empty()) {
    throw ContractError("class " + std::to_string(class_id) + " has no training graphs");
  }
  ClassBatch batch{class_id, {}};
  if (members.size() <= batch_size) {
    batch.graph_indices = std::move(members);
    return batch;
  }
  // Partial Fisher-Yates: the first batch_size slots become the sample.
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
    std::swap(members[i], members[pick(rng)]);
  }
  members.resize(batch_size);
  batch.graph_indices = std::move(members);
  return batch;
}

std::size_t mean_node_count(const GraphDataset& dataset, SplitPart which) {
  const auto& idx = dataset.part(which);
  if (idx.empty()) throw ContractError("mean_node_count: split is empty");
  double total = 0.0;
  for (std::size_t i : idx) total += static_cast<double>(dataset.graphs[i].node_count());
  const auto rounded = static_cast<std::size_t>(std::llround(total / static_cast<double>(idx.size())));
  return std::max<std::size_t>(rounded, 2);
}

std::uint64_t dataset_fingerprint(const GraphDataset& dataset) {
  Fnv1a h;
  h.update(static_cast<std::uint64_t>(dataset.num_classes));
  h.update(static_cast<std::uint64_t>(dataset.feature_dim));
  for (const Graph& g : dataset.graphs) {
    h.update(static_cast<std::uint64_t>(g.label));
    h.update(static_cast<std::uint64_t>(g.node_count()));
    for (double v : g.adjacency.values()) h.update(v);
    for (double v : g.features.values()) h.update(v);
  }
  return h.digest();
}

}  // namespace gstam
