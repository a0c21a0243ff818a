#pragma once

#include <functional>

#include "fploc/matrix.hpp"

namespace fploc {

// Central-difference gradient estimate of a scalar-valued function:
// (f(x + h e_i) - f(x - h e_i)) / 2h per entry. Verification oracle for the
// hand-derived backward passes.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& x, double h = 1e-5);

// max over entries of |a - n| / (|a| + |n| + 1e-6); the denominators floor
// keeps exactly-zero gradients from blowing up the ratio.
double max_relative_error(const Matrix& analytic, const Matrix& numeric);

}  // namespace fploc
