#include "fploc/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "fploc/exceptions.hpp"

namespace fploc {

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& x, double h) {
  if (!(h > 0.0)) {
    throw ValidationError("finite_diff_grad: step h must be positive");
  }
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double fp = f(probe);
    probe.data()[i] = orig - h;
    const double fm = f(probe);
    probe.data()[i] = orig;
    grad.data()[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Matrix& analytic, const Matrix& numeric) {
  if (!analytic.same_shape(numeric)) {
    throw ShapeError("max_relative_error: shape mismatch (" +
                     analytic.shape_str() + " vs " + numeric.shape_str() +
                     ")");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    const double rel =
        std::fabs(a - n) / (std::fabs(a) + std::fabs(n) + 1e-6);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace fploc
