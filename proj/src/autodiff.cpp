#include "meshflow/autodiff.hpp"

#include <cmath>
#include <string>

#include "meshflow/error.hpp"

namespace meshflow {

Parameter::Parameter(std::string name, Matrix value)
    : name_(std::move(name)),
      value_(std::move(value)),
      grad_(Matrix::Zero(value_.rows(), value_.cols())),
      m_(Matrix::Zero(value_.rows(), value_.cols())),
      v_(Matrix::Zero(value_.rows(), value_.cols())) {}

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

const Matrix* GradientMap::find(const Parameter& p) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i] == &p) return &grads[i];
  }
  return nullptr;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = track_gradients_;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (!track_gradients_) return constant(p.value());
  for (const auto& [ptr, id] : param_nodes_) {
    if (ptr == &p) return Var(this, id);
  }
  Node n;
  n.value = p.value();
  n.requires_grad = true;
  n.param = &p;
  Var v = push(std::move(n));
  param_nodes_.emplace_back(&p, v.id());
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape() != this) throw ShapeError("operand recorded on a different tape");
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backprop = std::move(backprop);
  return push(std::move(n));
}

Var Tape::record_backprop(const Var& v, Backprop backprop) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) throw ShapeError("record_backprop on a node without gradient");
  n.backprop = std::move(backprop);
  return v;
}

Matrix* Tape::grad_buffer(const Var& v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return &n.grad;
}

void Tape::propagate(const Var& loss) {
  if (loss.tape() != this) throw ShapeError("loss recorded on a different tape");
  const Matrix& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward needs a 1 x 1 loss, got " + std::to_string(lv.rows()) + " x " +
                     std::to_string(lv.cols()));
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0 || !n.backprop) continue;
    // The closure may grow other nodes' buffers but never this one.
    const Matrix& g = n.grad;
    n.backprop(*this, g);
  }
}

void Tape::backward(const Var& loss) {
  propagate(loss);
  for (const auto& [p, id] : param_nodes_) {
    if (nodes_[id].grad.size() != 0) p->grad() += nodes_[id].grad;
  }
}

GradientMap Tape::gradients(const Var& loss) {
  propagate(loss);
  GradientMap out;
  for (const auto& [p, id] : param_nodes_) {
    out.params.push_back(p);
    if (nodes_[id].grad.size() != 0) {
      out.grads.push_back(nodes_[id].grad);
    } else {
      out.grads.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
    }
  }
  return out;
}

namespace ad {
namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " + shape(b.value()));
  }
}

// Elementwise unary op; the derivative sees the input and the output.
template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Matrix out = a.value().unaryExpr(fwd);
  Tape& t = *a.tape();
  Var y = t.record(std::move(out), {a}, nullptr);
  if (!t.requires_grad(y)) return y;
  return t.record_backprop(y, [a, y, deriv](Tape& tape, const Matrix& g) {
    Matrix* ga = tape.grad_buffer(a);
    const double* x = a.value().data();
    const double* yv = y.value().data();
    double* out = ga->data();
    for (Eigen::Index i = 0; i < g.size(); ++i) out[i] += g.data()[i] * deriv(x[i], yv[i]);
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape(a.value()) + " * " + shape(b.value()));
  }
  Matrix out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) ga->noalias() += g * b.value().transpose();
    if (Matrix* gb = t.grad_buffer(b)) gb->noalias() += a.value().transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) *ga += g;
    if (Matrix* gb = t.grad_buffer(b)) *gb += g;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) *ga += g;
    if (Matrix* gb = t.grad_buffer(b)) *gb -= g;
  });
}

Var scalar_mul(const Var& a, double s) {
  return a.tape()->record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) *ga += g * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Matrix out = a.value().array() + s;
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) *ga += g;
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) *ga += g.cwiseProduct(b.value());
    if (Matrix* gb = t.grad_buffer(b)) *gb += g.cwiseProduct(a.value());
  });
}

Var reciprocal(const Var& a) {
  return unary(a, [](double x) { return 1.0 / x; }, [](double x, double) { return -1.0 / (x * x); });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(const Var& a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

namespace {
double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(const Var& a) {
  return unary(a, logistic, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
  return unary(a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
               [](double x, double) { return logistic(x); });
}

Var elu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
               [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var row_gather(const Var& a, std::vector<NodeId> indices) {
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(indices.size()), x.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= x.rows()) throw IndexError("row_gather: index " + std::to_string(indices[k]) + " out of range");
    out.row(static_cast<Eigen::Index>(k)) = x.row(indices[k]);
  }
  return a.tape()->record(std::move(out), {a}, [a, idx = std::move(indices)](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(a);
    for (std::size_t k = 0; k < idx.size(); ++k) ga->row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
  });
}

Var row_scatter_add(const Var& a, std::vector<NodeId> indices, std::size_t rows) {
  const Matrix& x = a.value();
  if (static_cast<std::size_t>(x.rows()) != indices.size()) {
    throw ShapeError("row_scatter_add: " + std::to_string(x.rows()) + " rows but " +
                     std::to_string(indices.size()) + " indices");
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows), x.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= rows) throw IndexError("row_scatter_add: index " + std::to_string(indices[k]) + " out of range");
    out.row(indices[k]) += x.row(static_cast<Eigen::Index>(k));
  }
  return a.tape()->record(std::move(out), {a}, [a, idx = std::move(indices)](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(a);
    for (std::size_t k = 0; k < idx.size(); ++k) ga->row(static_cast<Eigen::Index>(k)) += g.row(idx[k]);
  });
}

Var neighbor_aggregate(std::shared_ptr<const EdgeSet> edges, const std::optional<Var>& weights,
                       const Var& x, Aggregate mode) {
  const EdgeSet& es = *edges;
  const Matrix& xv = x.value();
  if (static_cast<std::size_t>(xv.rows()) != es.num_nodes) {
    throw ShapeError("neighbor_aggregate: features have " + std::to_string(xv.rows()) + " rows, graph has " +
                     std::to_string(es.num_nodes) + " nodes");
  }
  const double* w = nullptr;
  if (weights) {
    if (weights->tape() != x.tape()) throw ShapeError("neighbor_aggregate: weights on a different tape");
    if (static_cast<std::size_t>(weights->rows()) != es.size() || weights->cols() != 1) {
      throw ShapeError("neighbor_aggregate: weights must be E x 1");
    }
    w = weights->value().data();
  }
  for (std::size_t e = 0; e < es.size(); ++e) {
    if (es.src[e] >= es.num_nodes || es.dst[e] >= es.num_nodes) throw IndexError("neighbor_aggregate: edge index out of range");
  }

  const Eigen::Index f = xv.cols();
  Matrix out = Matrix::Zero(xv.rows(), f);
  const double* xp = xv.data();
  double* op = out.data();
  for (std::size_t e = 0; e < es.size(); ++e) {
    const double we = w ? w[e] : 1.0;
    const double* from = xp + es.src[e] * f;
    double* to = op + es.dst[e] * f;
    for (Eigen::Index c = 0; c < f; ++c) to[c] += we * from[c];
  }
  std::vector<double> inv_count;
  if (mode == Aggregate::mean) {
    const auto deg = es.in_degree();
    inv_count.resize(deg.size());
    for (std::size_t i = 0; i < deg.size(); ++i) {
      if (deg[i] == 0) throw DataError("neighbor_aggregate: mean over empty neighbor set at node " + std::to_string(i));
      inv_count[i] = 1.0 / static_cast<double>(deg[i]);
      out.row(static_cast<Eigen::Index>(i)) *= inv_count[i];
    }
  }

  Tape& tape = *x.tape();
  auto backprop = [edges = std::move(edges), weights, x, inv = std::move(inv_count)](Tape& t, const Matrix& g) {
    const EdgeSet& es = *edges;
    const Eigen::Index f = g.cols();
    Matrix scaled;
    const Matrix* gin = &g;
    if (!inv.empty()) {
      scaled = g;
      for (std::size_t i = 0; i < inv.size(); ++i) scaled.row(static_cast<Eigen::Index>(i)) *= inv[i];
      gin = &scaled;
    }
    const double* gp = gin->data();
    const double* w = weights ? weights->value().data() : nullptr;
    if (Matrix* gx = t.grad_buffer(x)) {
      double* out = gx->data();
      for (std::size_t e = 0; e < es.size(); ++e) {
        const double we = w ? w[e] : 1.0;
        const double* from = gp + es.dst[e] * f;
        double* to = out + es.src[e] * f;
        for (Eigen::Index c = 0; c < f; ++c) to[c] += we * from[c];
      }
    }
    if (weights) {
      if (Matrix* gw = t.grad_buffer(*weights)) {
        const double* xp = x.value().data();
        double* out = gw->data();
        for (std::size_t e = 0; e < es.size(); ++e) {
          const double* a = gp + es.dst[e] * f;
          const double* b = xp + es.src[e] * f;
          double dot = 0.0;
          for (Eigen::Index c = 0; c < f; ++c) dot += a[c] * b[c];
          out[e] += dot;
        }
      }
    }
  };
  if (weights) return tape.record(std::move(out), {x, *weights}, std::move(backprop));
  return tape.record(std::move(out), {x}, std::move(backprop));
}

Var gaussian_edge_weights(std::shared_ptr<const EdgeSet> edges, const Var& mu, const Var& raw_variance) {
  if (mu.rows() != 1 || mu.cols() != 1 || raw_variance.rows() != 1 || raw_variance.cols() != 1) {
    throw ShapeError("gaussian_edge_weights: mu and variance must be 1 x 1");
  }
  if (edges->attr.size() != edges->size()) throw ShapeError("gaussian_edge_weights: edge set has no attributes");
  const double m = mu.value()(0, 0);
  const double r = raw_variance.value()(0, 0);
  const double v = std::max(r, 0.0) + std::log1p(std::exp(-std::abs(r)));
  const std::vector<double>& e = edges->attr;
  Matrix out(static_cast<Eigen::Index>(e.size()), 1);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double d = e[i] - m;
    out(static_cast<Eigen::Index>(i), 0) = std::exp(-0.5 * d * d / v);
  }
  Tape& t = *mu.tape();
  Var w = t.record(std::move(out), {mu, raw_variance}, nullptr);
  if (!t.requires_grad(w)) return w;
  return t.record_backprop(w, [edges = std::move(edges), mu, raw_variance, w, m, r, v](Tape& tape, const Matrix& g) {
    const std::vector<double>& e = edges->attr;
    const double* wv = w.value().data();
    double dmu = 0.0, dvar = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double d = e[i] - m;
      const double gw = g.data()[i] * wv[i];
      dmu += gw * d / v;
      dvar += gw * 0.5 * d * d / (v * v);
    }
    if (Matrix* gm = tape.grad_buffer(mu)) (*gm)(0, 0) += dmu;
    if (Matrix* gr = tape.grad_buffer(raw_variance)) (*gr)(0, 0) += dvar * logistic(r);
  });
}

Var reduce(const Var& a, Reduce kind, Axis axis) {
  const Matrix& x = a.value();
  Matrix out;
  double scale = 1.0;
  switch (axis) {
    case Axis::rows:
      out = x.colwise().sum();
      scale = kind == Reduce::mean ? 1.0 / static_cast<double>(x.rows()) : 1.0;
      break;
    case Axis::cols:
      out = x.rowwise().sum();
      scale = kind == Reduce::mean ? 1.0 / static_cast<double>(x.cols()) : 1.0;
      break;
    case Axis::all:
      out = Matrix::Constant(1, 1, x.sum());
      scale = kind == Reduce::mean ? 1.0 / static_cast<double>(x.size()) : 1.0;
      break;
  }
  if (scale != 1.0) out *= scale;
  return a.tape()->record(std::move(out), {a}, [a, axis, scale](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(a);
    switch (axis) {
      case Axis::rows:
        ga->rowwise() += (g * scale).row(0);
        break;
      case Axis::cols:
        ga->colwise() += (g * scale).col(0);
        break;
      case Axis::all:
        ga->array() += g(0, 0) * scale;
        break;
    }
  });
}

Var sum(const Var& a) { return reduce(a, Reduce::sum, Axis::all); }

Var broadcast_rows(const Var& v, std::size_t rows) {
  if (v.rows() != 1) throw ShapeError("broadcast_rows expects a 1 x F value, got " + shape(v.value()));
  Matrix out = v.value().replicate(static_cast<Eigen::Index>(rows), 1);
  return v.tape()->record(std::move(out), {v}, [v](Tape& t, const Matrix& g) {
    *t.grad_buffer(v) += g.colwise().sum();
  });
}

Var broadcast_cols(const Var& v, std::size_t cols) {
  if (v.cols() != 1) throw ShapeError("broadcast_cols expects an N x 1 value, got " + shape(v.value()));
  Matrix out = v.value().replicate(1, static_cast<Eigen::Index>(cols));
  return v.tape()->record(std::move(out), {v}, [v](Tape& t, const Matrix& g) {
    *t.grad_buffer(v) += g.rowwise().sum();
  });
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw ShapeError("concat_cols: row counts differ " + shape(a.value()) + " vs " + shape(b.value()));
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  return a.tape()->record(std::move(out), {a, b}, [a, b, ca, cb](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) *ga += g.leftCols(ca);
    if (Matrix* gb = t.grad_buffer(b)) *gb += g.rightCols(cb);
  });
}

Var mse(const Var& pred, const Var& target) {
  require_same_shape(pred, target, "mse");
  return reduce(square(sub(pred, target)), Reduce::mean, Axis::all);
}

}  // namespace ad
}  // namespace meshflow
