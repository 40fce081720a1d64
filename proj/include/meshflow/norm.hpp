#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "meshflow/autodiff.hpp"

namespace meshflow {

enum class NormKind { none, layer, graph };

/// Feature normalisation applied after each convolution.
///   layer: statistics per node across its F features.
///   graph: statistics per feature across all N nodes, mean shifted by alpha.
/// Both use population variance; gamma/beta scale and shift per feature.
class NormLayer {
 public:
  static constexpr double kEpsilon = 1e-5;

  NormLayer(const std::string& name, NormKind kind, std::size_t channels);

  Var forward(Tape& tape, const Var& x);
  std::vector<Parameter*> parameters();

  NormKind kind() const { return kind_; }
  Parameter* gamma() { return kind_ == NormKind::none ? nullptr : &gamma_; }
  Parameter* beta() { return kind_ == NormKind::none ? nullptr : &beta_; }
  Parameter* alpha() { return alpha_ ? &*alpha_ : nullptr; }

 private:
  Var layer_norm(Tape& tape, const Var& x);
  Var graph_norm(Tape& tape, const Var& x);
  Var scale_shift(Tape& tape, const Var& xhat);

  NormKind kind_;
  std::size_t channels_;
  Parameter gamma_;
  Parameter beta_;
  std::optional<Parameter> alpha_;
};

}  // namespace meshflow
