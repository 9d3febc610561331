#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "gstam/autodiff.hpp"
#include "gstam/graph_data.hpp"
#include "gstam/seeding.hpp"
#include "gstam/tensor.hpp"

namespace gstam::testing {

inline Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double lo = -2.0,
                            double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = u(rng);
  return t;
}

// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
// gradient is ~0 from turning finite-difference noise into huge ratios.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Largest relative error between the gradient of `loss()` w.r.t. the leaf
// `x` and central differences of step eps. `loss` must rebuild the graph.
inline double max_gradient_error(Var& x, const std::function<Var()>& loss, double eps = 1e-5,
                                 double floor = 1e-6) {
  x.zero_grad();
  Var out = loss();
  backward(out);
  const Tensor analytic = x.grad();
  double worst = 0.0;
  for (std::size_t i = 0; i < x.value().size(); ++i) {
    const double saved = x.value()[i];
    x.mutable_value()[i] = saved + eps;
    const double up = loss().item();
    x.mutable_value()[i] = saved - eps;
    const double down = loss().item();
    x.mutable_value()[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * eps), floor));
  }
  return worst;
}

inline Tensor one_hot_features(const std::vector<int>& node_labels, std::size_t width) {
  Tensor x(node_labels.size(), width);
  for (std::size_t i = 0; i < node_labels.size(); ++i) x(i, node_labels[i]) = 1.0;
  return x;
}

// Random connected-ish graph with one-hot features; node labels biased by class.
inline Graph random_graph(std::size_t nodes, int label, std::size_t width, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::bernoulli_distribution extra(0.25);
  for (std::size_t i = 1; i < nodes; ++i) {
    edges.emplace_back(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng), i);
    for (std::size_t j = 0; j + 1 < i; ++j) {
      if (extra(rng)) edges.emplace_back(j, i);
    }
  }
  std::vector<int> kinds(nodes);
  const std::vector<double> weights = label == 0 ? std::vector<double>{6, 2, 1}
                                                 : std::vector<double>{1, 2, 6};
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  for (int& k : kinds) k = std::min<int>(pick(rng), static_cast<int>(width) - 1);
  return make_graph(nodes, edges, one_hot_features(kinds, width), label);
}

// Two-class dataset of `per_class` graphs each, split 80/10/10.
inline GraphDataset toy_dataset(std::size_t per_class, std::uint64_t seed, std::size_t min_nodes = 4,
                                std::size_t max_nodes = 8) {
  Rng rng(seed);
  GraphDataset ds;
  ds.name = "toy";
  ds.num_classes = 2;
  ds.feature_dim = 3;
  std::uniform_int_distribution<std::size_t> size(min_nodes, max_nodes);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c = 0; c < 2; ++c) ds.graphs.push_back(random_graph(size(rng), c, 3, rng));
  }
  return random_split(std::move(ds), seed);
}

}  // namespace gstam::testing

namespace gstam::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gstam_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, const std::string& text) const {
    const auto file = path_ / name;
    std::ofstream(file) << text;
    return file;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace gstam::testing
