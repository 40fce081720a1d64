#include "meshflow/optim.hpp"

#include <cmath>

#include "meshflow/error.hpp"

namespace meshflow {

void adam_step(std::span<Parameter* const> params, const AdamOptions& options) {
  for (const Parameter* p : params) {
    if (!p->grad().allFinite()) throw NumericError("non-finite gradient in parameter '" + p->name() + "'");
  }
  for (Parameter* p : params) {
    const std::int64_t t = p->step() + 1;
    p->set_step(t);
    const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(t));
    Matrix& m = p->first_moment();
    Matrix& v = p->second_moment();
    const Matrix& g = p->grad();
    Matrix& theta = p->value();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double gi = g.data()[i];
      m.data()[i] = options.beta1 * m.data()[i] + (1.0 - options.beta1) * gi;
      v.data()[i] = options.beta2 * v.data()[i] + (1.0 - options.beta2) * gi * gi;
      const double m_hat = m.data()[i] / c1;
      const double v_hat = v.data()[i] / c2;
      theta.data()[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
    p->zero_grad();
  }
}

}  // namespace meshflow
