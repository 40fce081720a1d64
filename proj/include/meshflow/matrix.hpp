#pragma once

#include <Eigen/Core>

namespace meshflow {

/// Dense row-major float64 matrix. Node-feature tensors are N x F.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace meshflow
