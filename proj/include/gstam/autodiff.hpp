#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "gstam/tensor.hpp"

namespace gstam {

// One vertex of an eagerly built computation graph. A node only keeps its
// parents and a backward rule when at least one parent requires a gradient,
// so forwarding constant data (real graphs, frozen weights) records nothing.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  const Tensor& value() const { return node_->value; }
  // Optimizers write leaf values in place; graph ops never do.
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad();

  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const { return node_->value.item(); }

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

enum class Axis {
  all,   // reduce every entry -> 1x1
  rows,  // reduce down the rows -> 1 x cols
  cols,  // reduce across the columns -> rows x 1
};

namespace ops {

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& x);

// Binary elementwise ops accept equal shapes or a 1x1 operand on either side.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var scale(const Var& x, double factor);
Var abs(const Var& x);
Var pow(const Var& x, double exponent);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);

Var sum(const Var& x, Axis axis = Axis::all);
Var mean(const Var& x, Axis axis = Axis::all);
// Euclidean norm. A zero slice yields 0 and passes back a zero gradient.
Var l2_norm(const Var& x, Axis axis = Axis::all);

// Row-major flatten to 1 x size.
Var flatten(const Var& x);
// x (r x c) + row (1 x c), row broadcast down every row of x.
Var add_row(const Var& x, const Var& row);
// Stacks 1 x c rows into an n x c matrix.
Var concat_rows(std::span<const Var> rows);
// Row r of the result is row order[r] of x.
Var gather_rows(const Var& x, std::span<const std::size_t> order);
// Materializes an n x n symmetric matrix with zero diagonal from the
// n(n-1)/2 strict-upper-triangle entries (row-major order) in a 1 x k vector.
Var upper_to_symmetric(const Var& upper, std::size_t n);
// Mean over rows of -log softmax(logits)[label]. logits is N x C.
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels);

}  // namespace ops

// Reverse sweep from a 1x1 loss. Leaves accumulate (two calls double their
// gradients); interior gradients are recomputed on every call.
void backward(const Var& loss);

// p <- p - lr * g
void sgd_step(Tensor& param, const Tensor& grad, double lr);
void sgd_step(std::span<Var> params, double lr);

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
  long step = 0;
};

void adam_step(AdamState& state, Tensor& param, const Tensor& grad, const AdamOptions& opts);

// Adam over a fixed parameter list, one moment pair per parameter.
class Adam {
 public:
  Adam(std::vector<Var> params, AdamOptions opts);
  void step();
  void zero_grad();
  const std::vector<Var>& params() const { return params_; }

 private:
  std::vector<Var> params_;
  std::vector<AdamState> states_;
  AdamOptions opts_;
};

}  // namespace gstam
