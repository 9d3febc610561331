#include "gstam/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "gstam/errors.hpp"

namespace gstam {

namespace {

using NodePtr = std::shared_ptr<Node>;

Var make_result(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> rule) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  const bool tracked = std::any_of(parents.begin(), parents.end(),
                                   [](const NodePtr& p) { return p->requires_grad; });
  if (tracked) {
    node->requires_grad = true;
    node->grad = Tensor(node->value.rows(), node->value.cols());
    node->parents = std::move(parents);
    node->backward = std::move(rule);
  }
  return Var(std::move(node));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

enum class Broadcast { same, scalar_left, scalar_right };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return Broadcast::same;
  if (a.is_scalar()) return Broadcast::scalar_left;
  if (b.is_scalar()) return Broadcast::scalar_right;
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                       b.shape_string());
}

// Elementwise binary op with scalar broadcasting. `fn` maps (x, y) to the
// value, `dx`/`dy` give the partial derivatives at (x, y).
template <class Fn, class Dx, class Dy>
Var binary(const Var& a, const Var& b, const char* name, Fn fn, Dx dx, Dy dy) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, name);
  const std::size_t rows = kind == Broadcast::scalar_left ? bv.rows() : av.rows();
  const std::size_t cols = kind == Broadcast::scalar_left ? bv.cols() : av.cols();
  const bool a_scalar = kind == Broadcast::scalar_left;
  const bool b_scalar = kind == Broadcast::scalar_right;

  Tensor out(rows, cols);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fn(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  }
  return make_result(std::move(out), {a.node(), b.node()},
                     [a_scalar, b_scalar, dx, dy](Node& self) {
                       Node& pa = *self.parents[0];
                       Node& pb = *self.parents[1];
                       const Tensor& g = self.grad;
                       if (pa.requires_grad) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           const double x = pa.value[a_scalar ? 0 : i];
                           const double y = pb.value[b_scalar ? 0 : i];
                           pa.grad[a_scalar ? 0 : i] += g[i] * dx(x, y);
                         }
                       }
                       if (pb.requires_grad) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           const double x = pa.value[a_scalar ? 0 : i];
                           const double y = pb.value[b_scalar ? 0 : i];
                           pb.grad[b_scalar ? 0 : i] += g[i] * dy(x, y);
                         }
                       }
                     });
}

// Elementwise unary op; `deriv(x, y)` receives the input and the output.
template <class Fn, class Deriv>
Var unary(const Var& x, Fn fn, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(xv[i]);
  return make_result(std::move(out), {x.node()}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->grad = Tensor(value.rows(), value.cols());
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void Var::zero_grad() {
  if (node_ && node_->requires_grad) node_->grad.fill(0.0);
}

namespace ops {

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.cols() == bv.rows(),
          "matmul: inner dimensions differ " + av.shape_string() + " x " + bv.shape_string());
  Tensor out(av.rows(), bv.cols());
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.grad.matrix().noalias() += self.grad.matrix() * pb.value.matrix().transpose();
    if (pb.requires_grad) pb.grad.matrix().noalias() += pa.value.matrix().transpose() * self.grad.matrix();
  });
}

Var transpose(const Var& x) {
  const Tensor& xv = x.value();
  Tensor out(xv.cols(), xv.rows());
  out.matrix() = xv.matrix().transpose();
  return make_result(std::move(out), {x.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.grad.matrix() += self.grad.matrix().transpose();
  });
}

Var add(const Var& a, const Var& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Var scale(const Var& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var abs(const Var& x) {
  return unary(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var pow(const Var& x, double exponent) {
  return unary(
      x,
      [exponent](double v) { return exponent == 2.0 ? v * v : std::pow(v, exponent); },
      [exponent](double v, double) {
        if (exponent == 1.0) return 1.0;
        if (exponent == 2.0) return 2.0 * v;
        return exponent * std::pow(v, exponent - 1.0);
      });
}

Var relu(const Var& x) {
  return unary(
      // NaN passes through so divergence is not silently masked.
      x, [](double v) { return v > 0.0 || std::isnan(v) ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sum(const Var& x, Axis axis) {
  const Tensor& xv = x.value();
  Tensor out;
  switch (axis) {
    case Axis::all:
      out = Tensor::scalar(xv.matrix().sum());
      break;
    case Axis::rows:
      out = Tensor(1, xv.cols());
      out.matrix() = xv.matrix().colwise().sum();
      break;
    case Axis::cols:
      out = Tensor(xv.rows(), 1);
      out.matrix() = xv.matrix().rowwise().sum();
      break;
  }
  return make_result(std::move(out), {x.node()}, [axis](Node& self) {
    Node& p = *self.parents[0];
    auto pg = p.grad.matrix();
    const auto g = self.grad.matrix();
    switch (axis) {
      case Axis::all:
        pg.array() += g(0, 0);
        break;
      case Axis::rows:
        pg.rowwise() += g.row(0);
        break;
      case Axis::cols:
        pg.colwise() += g.col(0);
        break;
    }
  });
}

Var mean(const Var& x, Axis axis) {
  const Tensor& xv = x.value();
  std::size_t count = 0;
  switch (axis) {
    case Axis::all:
      count = xv.size();
      break;
    case Axis::rows:
      count = xv.rows();
      break;
    case Axis::cols:
      count = xv.cols();
      break;
  }
  require(count > 0, "mean: empty reduction over " + xv.shape_string());
  return scale(sum(x, axis), 1.0 / static_cast<double>(count));
}

Var l2_norm(const Var& x, Axis axis) {
  const Tensor& xv = x.value();
  Tensor out;
  switch (axis) {
    case Axis::all:
      out = Tensor::scalar(xv.matrix().norm());
      break;
    case Axis::rows:
      out = Tensor(1, xv.cols());
      out.matrix() = xv.matrix().colwise().norm();
      break;
    case Axis::cols:
      out = Tensor(xv.rows(), 1);
      out.matrix() = xv.matrix().rowwise().norm();
      break;
  }
  return make_result(std::move(out), {x.node()}, [axis](Node& self) {
    Node& p = *self.parents[0];
    const std::size_t rows = p.value.rows();
    const std::size_t cols = p.value.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t slot = axis == Axis::all ? 0 : (axis == Axis::rows ? c : r);
        const double norm = self.value[slot];
        if (norm == 0.0) continue;
        p.grad(r, c) += self.grad[slot] * p.value(r, c) / norm;
      }
    }
  });
}

Var flatten(const Var& x) {
  const Tensor& xv = x.value();
  Tensor out(1, xv.size(), xv.storage());
  return make_result(std::move(out), {x.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

Var add_row(const Var& x, const Var& row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  require(rv.rows() == 1 && rv.cols() == xv.cols(),
          "add_row: row " + rv.shape_string() + " does not broadcast over " + xv.shape_string());
  Tensor out = xv;
  out.matrix().rowwise() += rv.matrix().row(0);
  return make_result(std::move(out), {x.node(), row.node()}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pr = *self.parents[1];
    if (px.requires_grad) px.grad.matrix() += self.grad.matrix();
    if (pr.requires_grad) pr.grad.matrix() += self.grad.matrix().colwise().sum();
  });
}

Var concat_rows(std::span<const Var> rows) {
  require(!rows.empty(), "concat_rows: no inputs");
  const std::size_t cols = rows.front().cols();
  std::size_t total = 0;
  std::vector<NodePtr> parents;
  parents.reserve(rows.size());
  for (const Var& r : rows) {
    require(r.cols() == cols, "concat_rows: column count mismatch");
    total += r.rows();
    parents.push_back(r.node());
  }
  Tensor out(total, cols);
  std::size_t offset = 0;
  for (const Var& r : rows) {
    std::copy(r.value().storage().begin(), r.value().storage().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(offset * cols));
    offset += r.rows();
  }
  return make_result(std::move(out), std::move(parents), [](Node& self) {
    std::size_t at = 0;
    for (const NodePtr& p : self.parents) {
      const std::size_t n = p->value.size();
      if (p->requires_grad) {
        for (std::size_t i = 0; i < n; ++i) p->grad[i] += self.grad[at + i];
      }
      at += n;
    }
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> order) {
  const Tensor& xv = x.value();
  const std::size_t cols = xv.cols();
  Tensor out(order.size(), cols);
  for (std::size_t r = 0; r < order.size(); ++r) {
    require(order[r] < xv.rows(), "gather_rows: row index out of range");
    std::copy_n(xv.storage().begin() + static_cast<std::ptrdiff_t>(order[r] * cols), cols,
                out.values().begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  std::vector<std::size_t> rows(order.begin(), order.end());
  return make_result(std::move(out), {x.node()}, [rows = std::move(rows), cols](Node& self) {
    Node& px = *self.parents[0];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) px.grad[rows[r] * cols + c] += self.grad[r * cols + c];
    }
  });
}

Var upper_to_symmetric(const Var& upper, std::size_t n) {
  const Tensor& uv = upper.value();
  const std::size_t expected = n * (n - (n > 0 ? 1 : 0)) / 2;
  require(uv.rows() == 1 && uv.cols() == expected,
          "upper_to_symmetric: expected 1x" + std::to_string(expected) + ", got " +
              uv.shape_string());
  Tensor out(n, n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++k) {
      out(i, j) = uv[k];
      out(j, i) = uv[k];
    }
  }
  return make_result(std::move(out), {upper.node()}, [n](Node& self) {
    Node& p = *self.parents[0];
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j, ++k) {
        p.grad[k] += self.grad(i, j) + self.grad(j, i);
      }
    }
  });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  require(z.rows() == labels.size() && z.rows() > 0,
          "softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
              z.shape_string());
  const std::size_t n = z.rows();
  const std::size_t c = z.cols();
  Tensor probs(n, c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw ContractError("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    }
    double peak = z(i, 0);
    for (std::size_t j = 1; j < c; ++j) peak = std::max(peak, z(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs(i, j) = std::exp(z(i, j) - peak);
      total += probs(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) probs(i, j) /= total;
    loss += std::log(total) + peak - z(i, static_cast<std::size_t>(y));
  }
  loss /= static_cast<double>(n);
  std::vector<int> owned(labels.begin(), labels.end());
  return make_result(Tensor::scalar(loss), {logits.node()},
                     [probs = std::move(probs), owned = std::move(owned)](Node& self) {
                       Node& p = *self.parents[0];
                       const double g = self.grad[0] / static_cast<double>(owned.size());
                       for (std::size_t i = 0; i < probs.rows(); ++i) {
                         for (std::size_t j = 0; j < probs.cols(); ++j) {
                           const double target =
                               static_cast<int>(j) == owned[i] ? 1.0 : 0.0;
                           p.grad(i, j) += g * (probs(i, j) - target);
                         }
                       }
                     });
}

}  // namespace ops

void backward(const Var& loss) {
  if (!loss) throw ContractError("backward: empty loss");
  if (!loss.value().is_scalar()) {
    throw ContractError("backward: loss must be scalar, got " + loss.value().shape_string());
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS over the tracked subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : order) {
    if (!node->is_leaf()) node->grad.fill(0.0);
  }
  Node& root = *loss.node();
  if (root.is_leaf()) {
    root.grad[0] += 1.0;
    return;
  }
  root.grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward(**it);
  }
}

void sgd_step(Tensor& param, const Tensor& grad, double lr) {
  if (!param.same_shape(grad)) {
    throw DimensionError("sgd_step: param " + param.shape_string() + " vs grad " +
                         grad.shape_string());
  }
  param.matrix() -= lr * grad.matrix();
}

void sgd_step(std::span<Var> params, double lr) {
  for (Var& p : params) sgd_step(p.mutable_value(), p.grad(), lr);
}

void adam_step(AdamState& state, Tensor& param, const Tensor& grad, const AdamOptions& opts) {
  if (!param.same_shape(grad)) {
    throw DimensionError("adam_step: param " + param.shape_string() + " vs grad " +
                         grad.shape_string());
  }
  if (state.m.empty() && state.v.empty()) {
    state.m = Tensor(param.rows(), param.cols());
    state.v = Tensor(param.rows(), param.cols());
  }
  if (!state.m.same_shape(param) || !state.v.same_shape(param)) {
    throw DimensionError("adam_step: state shape does not match param " + param.shape_string());
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = opts.beta1 * state.m[i] + (1.0 - opts.beta1) * g;
    state.v[i] = opts.beta2 * state.v[i] + (1.0 - opts.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    param[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
  }
}

Adam::Adam(std::vector<Var> params, AdamOptions opts)
    : params_(std::move(params)), states_(params_.size()), opts_(opts) {}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step(states_[i], params_[i].mutable_value(), params_[i].grad(), opts_);
  }
}

void Adam::zero_grad() {
  for (Var& p : params_) p.zero_grad();
}

}  // namespace gstam
