#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Everything here works on dense matrices and plain loops and shares
// no code with the library besides the Graph container.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "meshflow/graph.hpp"
#include "meshflow/matrix.hpp"

namespace oracle {

using meshflow::Graph;
using meshflow::Matrix;
using meshflow::NodeId;
using meshflow::Point2;

/// Random graph with n nodes in the unit square, each pair joined with
/// probability `density`.
inline Graph random_graph(std::size_t n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point2> coords(n);
  for (Point2& p : coords) p = {u(rng), u(rng)};
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      if (u(rng) < density) pairs.emplace_back(i, j);
    }
  }
  return Graph::build(std::move(coords), pairs);
}

/// Path 0 - 1 - ... - (n-1) along the x axis with unit spacing.
inline Graph chain(std::size_t n, double spacing = 1.0) {
  std::vector<Point2> coords(n);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (std::size_t i = 0; i < n; ++i) coords[i] = {spacing * static_cast<double>(i), 0.0};
  for (NodeId i = 0; i + 1 < n; ++i) pairs.emplace_back(i, i + 1);
  return Graph::build(std::move(coords), pairs);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Dense adjacency A(i, j) = weight of the edge j -> i, built from the
/// undirected pair list and coordinates only.
inline Matrix dense_adjacency(const Graph& g, bool lengths) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix a = Matrix::Zero(n, n);
  for (auto [i, j] : g.undirected_edges()) {
    const Point2 p = g.coords()[i];
    const Point2 q = g.coords()[j];
    const double w = lengths ? std::hypot(p.x - q.x, p.y - q.y) : 1.0;
    a(i, j) = w;
    a(j, i) = w;
  }
  return a;
}

/// D^-1/2 (A + sI) D^-1/2 X Theta with D = diag(s + row sums of A).
inline Matrix dense_gcn(const Graph& g, const Matrix& x, const Matrix& theta, double s, bool lengths) {
  const Matrix a = dense_adjacency(g, lengths);
  const auto n = a.rows();
  Matrix a_hat = a + s * Matrix::Identity(n, n);
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = s + a.row(i).sum();
  Matrix d_inv_sqrt = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) d_inv_sqrt(i, i) = 1.0 / std::sqrt(d(i));
  return d_inv_sqrt * a_hat * d_inv_sqrt * x * theta;
}

/// Result of the reference top-k pooling.
struct RefPool {
  std::vector<NodeId> idx;
  Matrix x;           // k x F gated features
  Matrix adjacency;   // k x k, 1 where both kept nodes were adjacent
  std::vector<Point2> coords;
};

/// Top-k pooling written directly from the algorithm: project, rank by a full
/// sort (score descending, index ascending), gate with tanh, slice the
/// adjacency.
inline RefPool ref_gpool(const Graph& g, const Matrix& x, const Matrix& p, double ratio) {
  const auto n = static_cast<std::size_t>(x.rows());
  const double norm = p.norm();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (Eigen::Index f = 0; f < x.cols(); ++f) dot += x(static_cast<Eigen::Index>(i), f) * p(f, 0);
    y[i] = dot / norm;
  }
  // Smallest k with k >= ratio * n, tolerant of rounding in the product.
  std::size_t k = 1;
  while (static_cast<double>(k) + 1e-9 < ratio * static_cast<double>(n)) ++k;
  k = std::clamp<std::size_t>(k, 1, n);

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return y[a] != y[b] ? y[a] > y[b] : a < b; });

  RefPool out;
  out.idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  out.x.resize(static_cast<Eigen::Index>(k), x.cols());
  for (std::size_t r = 0; r < k; ++r) {
    const double gate = std::tanh(y[out.idx[r]]);
    out.x.row(static_cast<Eigen::Index>(r)) = x.row(out.idx[r]) * gate;
  }
  const Matrix a = dense_adjacency(g, false);
  out.adjacency.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) out.adjacency(r, c) = a(out.idx[r], out.idx[c]);
  }
  for (NodeId i : out.idx) out.coords.push_back(g.coords()[i]);
  return out;
}

/// Zero matrix of n rows with row idx[r] set to x.row(r).
inline Matrix ref_gunpool(std::size_t n, const std::vector<NodeId>& idx, const Matrix& x) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(idx[r]) = x.row(static_cast<Eigen::Index>(r));
  return out;
}

/// Per-row standardisation with population variance.
inline Matrix ref_layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, double eps) {
  Matrix out(x.rows(), x.cols());
  const double f = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) mean += x(i, j);
    mean /= f;
    double var = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= f;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out(i, j) = gamma(0, j) * (x(i, j) - mean) / std::sqrt(var + eps) + beta(0, j);
    }
  }
  return out;
}

/// Per-column standardisation around alpha * mean.
inline Matrix ref_graph_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, const Matrix& alpha,
                             double eps) {
  Matrix out(x.rows(), x.cols());
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double mean = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) mean += x(i, j);
    mean /= n;
    const double shift = alpha(0, j) * mean;
    double var = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) var += (x(i, j) - shift) * (x(i, j) - shift);
    var /= n;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i, j) = gamma(0, j) * (x(i, j) - shift) / std::sqrt(var + eps) + beta(0, j);
    }
  }
  return out;
}

/// Relabels nodes: new node perm[i] is old node i.
inline Graph permute_graph(const Graph& g, const std::vector<NodeId>& perm) {
  std::vector<Point2> coords(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) coords[perm[i]] = g.coords()[i];
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (auto [i, j] : g.undirected_edges()) pairs.emplace_back(perm[i], perm[j]);
  return Graph::build(std::move(coords), pairs);
}

inline Matrix permute_rows(const Matrix& x, const std::vector<NodeId>& perm) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(perm[static_cast<std::size_t>(i)]) = x.row(i);
  return out;
}

inline std::vector<NodeId> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace oracle
