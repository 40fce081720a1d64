#include "meshflow/norm.hpp"

#include "meshflow/error.hpp"

namespace meshflow {

NormLayer::NormLayer(const std::string& name, NormKind kind, std::size_t channels)
    : kind_(kind),
      channels_(channels),
      gamma_(name + ".gamma", Matrix::Ones(1, static_cast<Eigen::Index>(channels))),
      beta_(name + ".beta", Matrix::Zero(1, static_cast<Eigen::Index>(channels))) {
  if (channels == 0) throw DataError("normalisation needs at least one channel");
  if (kind == NormKind::graph) alpha_.emplace(name + ".alpha", Matrix::Ones(1, static_cast<Eigen::Index>(channels)));
}

std::vector<Parameter*> NormLayer::parameters() {
  std::vector<Parameter*> out;
  if (kind_ == NormKind::none) return out;
  out = {&gamma_, &beta_};
  if (alpha_) out.push_back(&*alpha_);
  return out;
}

Var NormLayer::forward(Tape& tape, const Var& x) {
  if (static_cast<std::size_t>(x.cols()) != channels_) {
    throw ShapeError("norm: input has " + std::to_string(x.cols()) + " channels, layer expects " +
                     std::to_string(channels_));
  }
  switch (kind_) {
    case NormKind::none:
      return x;
    case NormKind::layer:
      return layer_norm(tape, x);
    case NormKind::graph:
      return graph_norm(tape, x);
  }
  return x;
}

Var NormLayer::layer_norm(Tape& tape, const Var& x) {
  using namespace ad;
  const auto f = static_cast<std::size_t>(x.cols());
  const Var centered = sub(x, broadcast_cols(reduce(x, Reduce::mean, Axis::cols), f));
  const Var variance = reduce(square(centered), Reduce::mean, Axis::cols);
  const Var inv_std = reciprocal(sqrt(add_scalar(variance, kEpsilon)));
  return scale_shift(tape, mul(centered, broadcast_cols(inv_std, f)));
}

Var NormLayer::graph_norm(Tape& tape, const Var& x) {
  using namespace ad;
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw DataError("graph norm on an empty graph");
  const Var shift = mul(reduce(x, Reduce::mean, Axis::rows), tape.param(*alpha_));
  const Var centered = sub(x, broadcast_rows(shift, n));
  const Var variance = reduce(square(centered), Reduce::mean, Axis::rows);
  const Var inv_std = reciprocal(sqrt(add_scalar(variance, kEpsilon)));
  return scale_shift(tape, mul(centered, broadcast_rows(inv_std, n)));
}

Var NormLayer::scale_shift(Tape& tape, const Var& xhat) {
  const auto n = static_cast<std::size_t>(xhat.rows());
  return ad::add(ad::mul(xhat, ad::broadcast_rows(tape.param(gamma_), n)),
                 ad::broadcast_rows(tape.param(beta_), n));
}

}  // namespace meshflow
