#include "meshflow/gradcheck.hpp"

#include <cmath>

#include "meshflow/error.hpp"

namespace meshflow {
namespace {

double evaluate(const std::function<Var(Tape&)>& build_loss) {
  Tape tape;
  const Var loss = build_loss(tape);
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("gradient check needs a scalar loss");
  return loss.value()(0, 0);
}

}  // namespace

GradCheckResult finite_diff_check(const std::function<Var(Tape&)>& build_loss,
                                  std::span<Parameter* const> params, double h) {
  GradientMap analytic;
  {
    Tape tape;
    analytic = tape.gradients(build_loss(tape));
  }

  GradCheckResult result;
  for (Parameter* p : params) {
    const Matrix* grad = analytic.find(*p);
    Matrix& value = p->value();
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + h;
      const double f_plus = evaluate(build_loss);
      value.data()[i] = saved - h;
      const double f_minus = evaluate(build_loss);
      value.data()[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw NumericError("non-finite loss while perturbing '" + p->name() + "'[" + std::to_string(i) + "]");
      }
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = grad ? grad->data()[i] : 0.0;
      const double rel = std::abs(a - numeric) / (std::max(std::abs(a), std::abs(numeric)) + 1e-8);
      if (rel > result.max_relative_error || result.worst_index < 0) {
        result.max_relative_error = std::max(rel, result.max_relative_error);
        result.worst_parameter = p->name();
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace meshflow
