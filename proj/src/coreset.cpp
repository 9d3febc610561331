#include "gstam/coreset.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "gstam/errors.hpp"

namespace gstam {

EmbeddingTable raw_mean_embeddings(const GraphDataset& dataset) {
  EmbeddingTable table;
  table.rows = Tensor(dataset.split.train.size(), dataset.feature_dim);
  for (std::size_t r = 0; r < dataset.split.train.size(); ++r) {
    const std::size_t idx = dataset.split.train[r];
    const Graph& g = dataset.graphs[idx];
    table.rows.matrix().row(static_cast<Eigen::Index>(r)) = g.features.matrix().colwise().mean();
    table.graph_indices.push_back(idx);
    table.labels.push_back(g.label);
  }
  return table;
}

EmbeddingTable trained_embeddings(const GraphDataset& dataset, const GnnConfig& arch,
                                  const TrainOptions& options, std::uint64_t seed) {
  const CondensedSet train = full_training_set(dataset);
  const ModelParams model = train_classifier(train.graphs, arch, dataset.feature_dim, options, seed);
  EmbeddingTable table;
  table.rows = Tensor(train.graphs.size(), arch.hidden_dim);
  for (std::size_t r = 0; r < train.graphs.size(); ++r) {
    const LayerActivations acts = forward(model, train.graphs[r]);
    table.rows.matrix().row(static_cast<Eigen::Index>(r)) =
        acts.conv_maps.back().value().matrix().colwise().mean();
    table.graph_indices.push_back(train.source_indices[r]);
    table.labels.push_back(train.graphs[r].label);
  }
  return table;
}

std::vector<std::size_t> select_random(const GraphDataset& dataset, std::size_t per_class,
                                       std::uint64_t seed) {
  std::vector<std::size_t> out;
  for (int c = 0; c < dataset.num_classes; ++c) {
    std::vector<std::size_t> members = dataset.class_members(c);
    Rng rng(derive_seed(seed, "random-coreset", static_cast<std::uint64_t>(c)));
    const std::size_t take = std::min(per_class, members.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
      std::swap(members[i], members[pick(rng)]);
    }
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

namespace {

// Rows of the table grouped by label, ascending label then ascending row.
std::map<int, std::vector<std::size_t>> rows_by_class(const EmbeddingTable& table) {
  if (!table.rows.all_finite()) throw NumericError("coreset: non-finite embeddings");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < table.labels.size(); ++r) groups[table.labels[r]].push_back(r);
  return groups;
}

Eigen::RowVectorXd class_mean(const EmbeddingTable& table, const std::vector<std::size_t>& rows) {
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(table.rows.cols()));
  for (std::size_t r : rows) mu += table.rows.matrix().row(static_cast<Eigen::Index>(r));
  return mu / static_cast<double>(rows.size());
}

}  // namespace

std::vector<std::size_t> select_herding(const EmbeddingTable& table, std::size_t per_class) {
  const auto x = table.rows.matrix();
  std::vector<std::size_t> out;
  for (const auto& [label, rows] : rows_by_class(table)) {
    const Eigen::RowVectorXd mu = class_mean(table, rows);
    Eigen::RowVectorXd selected_sum = Eigen::RowVectorXd::Zero(mu.size());
    std::vector<bool> used(rows.size(), false);
    const std::size_t take = std::min(per_class, rows.size());
    for (std::size_t k = 0; k < take; ++k) {
      std::size_t best = rows.size();
      double best_gap = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (used[j]) continue;
        const auto candidate = (selected_sum + x.row(static_cast<Eigen::Index>(rows[j]))) /
                               static_cast<double>(k + 1);
        const double gap = (mu - candidate).norm();
        if (gap < best_gap) {
          best_gap = gap;
          best = j;
        }
      }
      used[best] = true;
      selected_sum += x.row(static_cast<Eigen::Index>(rows[best]));
      out.push_back(table.graph_indices[rows[best]]);
    }
  }
  return out;
}

std::vector<std::size_t> select_kcenter(const EmbeddingTable& table, std::size_t per_class) {
  const auto x = table.rows.matrix();
  std::vector<std::size_t> out;
  for (const auto& [label, rows] : rows_by_class(table)) {
    const std::size_t take = std::min(per_class, rows.size());
    if (take == 0) continue;
    const Eigen::RowVectorXd mu = class_mean(table, rows);
    std::size_t first = 0;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const double d = (x.row(static_cast<Eigen::Index>(rows[j])) - mu).norm();
      if (d < nearest) {
        nearest = d;
        first = j;
      }
    }
    // Distance from every row to its closest selected center.
    std::vector<double> cover(rows.size(), std::numeric_limits<double>::infinity());
    std::size_t pick = first;
    for (std::size_t k = 0; k < take; ++k) {
      out.push_back(table.graph_indices[rows[pick]]);
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const double d = (x.row(static_cast<Eigen::Index>(rows[j])) -
                          x.row(static_cast<Eigen::Index>(rows[pick])))
                             .norm();
        cover[j] = std::min(cover[j], d);
      }
      cover[pick] = -1.0;
      double farthest = -1.0;
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (cover[j] > farthest) {
          farthest = cover[j];
          pick = j;
        }
      }
    }
  }
  return out;
}

}  // namespace gstam
