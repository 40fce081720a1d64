#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "meshflow/autodiff.hpp"
#include "meshflow/graph.hpp"

namespace meshflow {

/// Glorot-uniform fan_in x fan_out matrix.
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

/// Common interface of the graph convolutions used in the U-Net.
class ConvLayer {
 public:
  virtual ~ConvLayer() = default;
  /// x is N x in_channels(); returns N x out_channels().
  virtual Var forward(Tape& tape, const Graph& g, const Var& x) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::size_t in_channels() const = 0;
  virtual std::size_t out_channels() const = 0;
};

enum class GcnVariant {
  vanilla,            // A + I, unit edge weights
  improved,           // A + 2I, unit edge weights
  improved_weighted,  // A + 2I, edge lengths as weights
};

/// x'_i = Theta^T sum_{j in N(i) u {i}} e_ji / sqrt(d_j d_i) x_j with
/// d_i = s + sum_j e_ji and self-loop weight s.
class GcnLayer final : public ConvLayer {
 public:
  GcnLayer(const std::string& name, std::size_t in, std::size_t out, GcnVariant variant,
           std::mt19937_64& rng, bool bias = false, bool first_layer = false);

  Var forward(Tape& tape, const Graph& g, const Var& x) override;
  std::vector<Parameter*> parameters() override;
  std::size_t in_channels() const override { return static_cast<std::size_t>(theta_.value().rows()); }
  std::size_t out_channels() const override { return static_cast<std::size_t>(theta_.value().cols()); }

  GcnVariant variant() const { return variant_; }
  bool first_layer() const { return first_layer_; }
  double self_loop_weight() const { return variant_ == GcnVariant::vanilla ? 1.0 : 2.0; }
  Parameter& theta() { return theta_; }
  Parameter* bias() { return bias_ ? &*bias_ : nullptr; }

  /// Self-loop-augmented edge set and its normalised coefficients for `g`.
  std::pair<std::shared_ptr<const EdgeSet>, Matrix> propagation(const Graph& g) const;

 private:
  Parameter theta_;
  std::optional<Parameter> bias_;
  GcnVariant variant_;
  bool first_layer_;
};

/// Gaussian kernel exp(-(e - mu)^2 / (2 variance)). Throws DataError when
/// variance <= 0.
double gmm_kernel_weight(double mu, double variance, double e);

/// x'_i = 1/|N(i)| sum_{j in N(i)} 1/K sum_k w_k(e_ij) Theta_k x_j with a
/// 1-D pseudo-coordinate (edge length). The kernel variance is softplus of a
/// raw parameter so it stays positive.
class GmmLayer final : public ConvLayer {
 public:
  /// Kernels start at mean `edge_scale` with standard deviation `edge_scale`.
  GmmLayer(const std::string& name, std::size_t in, std::size_t out, std::size_t kernels, double edge_scale,
           std::mt19937_64& rng, bool include_self_loops = true, bool bias = false);

  Var forward(Tape& tape, const Graph& g, const Var& x) override;
  std::vector<Parameter*> parameters() override;
  std::size_t in_channels() const override { return static_cast<std::size_t>(thetas_[0].value().rows()); }
  std::size_t out_channels() const override { return static_cast<std::size_t>(thetas_[0].value().cols()); }

  std::size_t kernels() const { return thetas_.size(); }
  bool include_self_loops() const { return include_self_loops_; }
  Parameter& theta(std::size_t k) { return thetas_[k]; }
  Parameter& mu(std::size_t k) { return mus_[k]; }
  Parameter& raw_variance(std::size_t k) { return raw_variances_[k]; }
  Parameter* bias() { return bias_ ? &*bias_ : nullptr; }
  double variance(std::size_t k) const;
  void set_variance(std::size_t k, double variance);

 private:
  std::vector<Parameter> thetas_;
  std::vector<Parameter> mus_;
  std::vector<Parameter> raw_variances_;
  std::optional<Parameter> bias_;
  bool include_self_loops_;
};

}  // namespace meshflow
