#include "meshflow/conv.hpp"

#include <cmath>

#include "meshflow/error.hpp"

namespace meshflow {
namespace {

void check_input(const Graph& g, const Var& x, std::size_t in, const char* layer) {
  if (static_cast<std::size_t>(x.rows()) != g.num_nodes()) {
    throw ShapeError(std::string(layer) + ": input has " + std::to_string(x.rows()) + " rows, graph has " +
                     std::to_string(g.num_nodes()) + " nodes");
  }
  if (static_cast<std::size_t>(x.cols()) != in) {
    throw ShapeError(std::string(layer) + ": input has " + std::to_string(x.cols()) + " channels, layer expects " +
                     std::to_string(in));
  }
}

Var add_bias(Tape& tape, const Var& h, Parameter* bias) {
  if (!bias) return h;
  return ad::add(h, ad::broadcast_rows(tape.param(*bias), static_cast<std::size_t>(h.rows())));
}

// Inverse of softplus for positive arguments.
double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix m(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

GcnLayer::GcnLayer(const std::string& name, std::size_t in, std::size_t out, GcnVariant variant,
                   std::mt19937_64& rng, bool bias, bool first_layer)
    : theta_(name + ".theta", glorot_uniform(in, out, rng)), variant_(variant), first_layer_(first_layer) {
  if (bias) bias_.emplace(name + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out)));
}

std::pair<std::shared_ptr<const EdgeSet>, Matrix> GcnLayer::propagation(const Graph& g) const {
  const std::size_t n = g.num_nodes();
  const std::size_t m = g.num_edges();
  const double s = self_loop_weight();
  const bool weighted = variant_ == GcnVariant::improved_weighted;
  const auto attrs = g.edge_attr();
  const auto edges = g.edges();

  std::vector<double> degree(n, s);
  for (std::size_t e = 0; e < m; ++e) {
    const double w = weighted ? attrs[e] : 1.0;
    if (w < 0.0) throw DataError("gcn: negative edge weight on edge " + std::to_string(e));
    degree[edges[e].dst] += w;
  }

  Matrix coeff(static_cast<Eigen::Index>(m + n), 1);
  for (std::size_t e = 0; e < m; ++e) {
    const double w = weighted ? attrs[e] : 1.0;
    coeff(static_cast<Eigen::Index>(e), 0) = w / std::sqrt(degree[edges[e].src] * degree[edges[e].dst]);
  }
  for (std::size_t i = 0; i < n; ++i) coeff(static_cast<Eigen::Index>(m + i), 0) = s / degree[i];
  return {g.looped_edge_set(), std::move(coeff)};
}

Var GcnLayer::forward(Tape& tape, const Graph& g, const Var& x) {
  check_input(g, x, in_channels(), "gcn");
  auto [edges, coeff] = propagation(g);
  const Var h = ad::matmul(x, tape.param(theta_));
  const Var agg = ad::neighbor_aggregate(std::move(edges), tape.constant(std::move(coeff)), h, ad::Aggregate::sum);
  return add_bias(tape, agg, bias());
}

std::vector<Parameter*> GcnLayer::parameters() {
  std::vector<Parameter*> out{&theta_};
  if (bias_) out.push_back(&*bias_);
  return out;
}

double gmm_kernel_weight(double mu, double variance, double e) {
  if (!(variance > 0.0)) throw DataError("gmm kernel variance must be positive");
  const double d = e - mu;
  return std::exp(-0.5 * d * d / variance);
}

GmmLayer::GmmLayer(const std::string& name, std::size_t in, std::size_t out, std::size_t kernels, double edge_scale,
                   std::mt19937_64& rng, bool include_self_loops, bool bias)
    : include_self_loops_(include_self_loops) {
  if (kernels == 0) throw DataError("gmm layer needs at least one kernel");
  if (!(edge_scale > 0.0)) edge_scale = 1.0;
  thetas_.reserve(kernels);
  mus_.reserve(kernels);
  raw_variances_.reserve(kernels);
  for (std::size_t k = 0; k < kernels; ++k) {
    const std::string suffix = std::to_string(k);
    thetas_.emplace_back(name + ".theta" + suffix, glorot_uniform(in, out, rng));
    mus_.emplace_back(name + ".mu" + suffix, Matrix::Constant(1, 1, edge_scale));
    raw_variances_.emplace_back(name + ".sigma" + suffix, Matrix::Constant(1, 1, softplus_inverse(edge_scale * edge_scale)));
  }
  if (bias) bias_.emplace(name + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out)));
}

double GmmLayer::variance(std::size_t k) const {
  const double r = raw_variances_[k].value()(0, 0);
  return std::max(r, 0.0) + std::log1p(std::exp(-std::abs(r)));
}

void GmmLayer::set_variance(std::size_t k, double variance) {
  if (!(variance > 0.0)) throw DataError("gmm kernel variance must be positive");
  raw_variances_[k].value()(0, 0) = softplus_inverse(variance);
}

Var GmmLayer::forward(Tape& tape, const Graph& g, const Var& x) {
  check_input(g, x, in_channels(), "gmm");
  const std::shared_ptr<const EdgeSet>& edges = include_self_loops_ ? g.looped_edge_set() : g.edge_set();
  std::optional<Var> acc;
  for (std::size_t k = 0; k < kernels(); ++k) {
    const Var h = ad::matmul(x, tape.param(thetas_[k]));
    const Var w = ad::gaussian_edge_weights(edges, tape.param(mus_[k]), tape.param(raw_variances_[k]));
    const Var agg = ad::neighbor_aggregate(edges, w, h, ad::Aggregate::mean);
    acc = acc ? ad::add(*acc, agg) : agg;
  }
  Var out = kernels() == 1 ? *acc : ad::scalar_mul(*acc, 1.0 / static_cast<double>(kernels()));
  return add_bias(tape, out, bias());
}

std::vector<Parameter*> GmmLayer::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t k = 0; k < kernels(); ++k) {
    out.push_back(&thetas_[k]);
    out.push_back(&mus_[k]);
    out.push_back(&raw_variances_[k]);
  }
  if (bias_) out.push_back(&*bias_);
  return out;
}

}  // namespace meshflow
