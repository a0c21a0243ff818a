#include <algorithm>
#include <cmath>

#include "fploc/kernels.hpp"

// Scalar reference kernels. These define the semantics; the SIMD variants
// are tested against them.

namespace fploc::kern {

namespace {

void gemm_scalar(std::size_t m, std::size_t k, std::size_t n, const double* a,
                 const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;  // fingerprints are mostly missing markers
      const double* brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(std::size_t n, double alpha, double* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void add_scalar(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void sub_scalar(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

void relu_scalar(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(std::size_t n, const double* pre, const double* grad,
                          double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? grad[i] : 0.0;
}

void adam_scalar(std::size_t n, double* param, const double* grad, double* m,
                 double* v, double beta1, double beta2, double eps, double lr,
                 double bias1, double bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    const double mhat = m[i] * bias1;
    const double vhat = v[i] * bias2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",        gemm_scalar, dot_scalar,  axpy_scalar,
      scale_scalar,    add_scalar,  sub_scalar,  relu_scalar,
      relu_backward_scalar, adam_scalar,
  };
  return ops;
}

}  // namespace fploc::kern
