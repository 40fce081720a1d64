#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "meshflow/graph.hpp"
#include "meshflow/matrix.hpp"

namespace meshflow {

/// Trainable matrix with its gradient accumulator and Adam moments.
class Parameter {
 public:
  Parameter(std::string name, Matrix value);

  const std::string& name() const { return name_; }
  Matrix& value() { return value_; }
  const Matrix& value() const { return value_; }
  Matrix& grad() { return grad_; }
  const Matrix& grad() const { return grad_; }

  Matrix& first_moment() { return m_; }
  const Matrix& first_moment() const { return m_; }
  Matrix& second_moment() { return v_; }
  const Matrix& second_moment() const { return v_; }
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  void zero_grad() { grad_.setZero(); }
  std::size_t size() const { return static_cast<std::size_t>(value_.size()); }

 private:
  std::string name_;
  Matrix value_;
  Matrix grad_;
  Matrix m_;
  Matrix v_;
  std::int64_t step_ = 0;
};

class Tape;

/// Handle to one recorded value on a tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient of the last backward pass; empty when the node was unreachable.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Per-parameter gradients in order of first use on the tape.
struct GradientMap {
  std::vector<Parameter*> params;
  std::vector<Matrix> grads;

  const Matrix* find(const Parameter& p) const;
};

/// Reverse-mode record of a computation. Nodes are appended in evaluation
/// order, so reverse insertion order is a valid topological order.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, const Matrix& out_grad)>;

  /// With track_gradients = false parameters enter as constants and no
  /// backward closures are kept (inference).
  explicit Tape(bool track_gradients = true) : track_gradients_(track_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf that receives a gradient but is not a Parameter.
  Var variable(Matrix value);
  /// The same Parameter always maps to the same leaf on one tape.
  Var param(Parameter& p);

  /// Appends a derived node. `backprop` runs only if some parent needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backprop backprop);
  /// Sets the backward closure of `v`, which must require a gradient. Lets a
  /// closure capture the node it belongs to.
  Var record_backprop(const Var& v, Backprop backprop);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  /// Gradient buffer of `v`, zero-initialised on first access during backward.
  /// Returns nullptr when `v` does not require a gradient.
  Matrix* grad_buffer(const Var& v);

  /// Accumulates d(loss)/d(param) into every reachable Parameter::grad.
  /// Throws ShapeError when `loss` is not 1 x 1.
  void backward(const Var& loss);

  /// Same propagation as backward() but leaves Parameter::grad untouched.
  GradientMap gradients(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  void propagate(const Var& loss);
  Var push(Node node);

  bool track_gradients_ = true;
  std::vector<Node> nodes_;
  std::vector<std::pair<Parameter*, std::size_t>> param_nodes_;
};

namespace ad {

enum class Aggregate { sum, mean };
enum class Reduce { sum, mean };
/// rows: collapse the row dimension (N x F -> 1 x F); cols: N x F -> N x 1.
enum class Axis { rows, cols, all };

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scalar_mul(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var mul(const Var& a, const Var& b);
Var reciprocal(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
Var exp(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
/// ELU with alpha = 1.
Var elu(const Var& a);

/// Rows of `a` at `indices`, in that order.
Var row_gather(const Var& a, std::vector<NodeId> indices);
/// rows x F zero matrix with a.row(k) added into row indices[k].
Var row_scatter_add(const Var& a, std::vector<NodeId> indices, std::size_t rows);

/// out_i = sum over edges (j -> i) of w_e * x_j; mean divides by the incoming
/// edge count and requires every node to have one. `weights` is E x 1 or
/// absent for unit weights. Accumulation follows edge order.
Var neighbor_aggregate(std::shared_ptr<const EdgeSet> edges, const std::optional<Var>& weights,
                       const Var& x, Aggregate mode);

/// E x 1 weights exp(-(attr_e - mu)^2 / (2 softplus(raw_variance))) over the
/// edge pseudo-coordinates; mu and raw_variance are 1 x 1.
Var gaussian_edge_weights(std::shared_ptr<const EdgeSet> edges, const Var& mu, const Var& raw_variance);

Var reduce(const Var& a, Reduce kind, Axis axis);
Var sum(const Var& a);
/// 1 x F -> rows x F.
Var broadcast_rows(const Var& v, std::size_t rows);
/// N x 1 -> N x cols.
Var broadcast_cols(const Var& v, std::size_t cols);
Var concat_cols(const Var& a, const Var& b);

/// Mean over all entries of (pred - target)^2, as a 1 x 1 value.
Var mse(const Var& pred, const Var& target);

}  // namespace ad
}  // namespace meshflow
