#pragma once

#include <span>

#include "meshflow/autodiff.hpp"

namespace meshflow {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over `params`, then zeroes their gradients.
/// If any gradient is non-finite nothing is updated and NumericError names the
/// offending parameter.
void adam_step(std::span<Parameter* const> params, const AdamOptions& options);

}  // namespace meshflow
