#pragma once

#include <functional>
#include <span>
#include <string>

#include "meshflow/autodiff.hpp"

namespace meshflow {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of `build_loss` against central
/// differences (f(p+h) - f(p-h)) / 2h for every entry of every parameter.
/// Relative error per entry is |a - n| / (max(|a|, |n|) + 1e-8).
/// Parameter values are restored afterwards; Parameter::grad is untouched.
GradCheckResult finite_diff_check(const std::function<Var(Tape&)>& build_loss,
                                  std::span<Parameter* const> params, double h = 1e-5);

}  // namespace meshflow
