#pragma once

#include <cstddef>

// Data-parallel inner loops used by the matrix/model layers. Each operation
// has a scalar reference implementation and, on x86-64 with AVX2+FMA, a
// vectorized variant. The active backend is selected once at runtime (CPU
// probe, overridable via the FPLOC_KERNELS environment variable or
// select_backend()). Backends are equivalence-tested against the scalar
// reference; results may differ by normal FMA/reassociation rounding, so a
// given backend is deterministic but backends are not bit-identical to each
// other.
namespace fploc::kern {

enum class Backend { Scalar, Avx2 };

struct Ops {
  const char* name;

  // C (m x n) = A (m x k) * B (k x n), all row-major contiguous.
  // If accumulate, C += A * B. Zero entries of A are skipped; for finite
  // inputs this is value-exact.
  void (*gemm)(std::size_t m, std::size_t k, std::size_t n, const double* a,
               const double* b, double* c, bool accumulate);

  double (*dot)(std::size_t n, const double* x, const double* y);

  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);

  void (*scale)(std::size_t n, double alpha, double* x);
  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  void (*sub)(std::size_t n, const double* x, const double* y, double* out);

  // out = max(0, x)
  void (*relu)(std::size_t n, const double* x, double* out);

  // out[i] = pre[i] > 0 ? grad[i] : 0   (ReLU subgradient at 0 is 0)
  void (*relu_backward)(std::size_t n, const double* pre, const double* grad,
                        double* out);

  // In-place Adam update of param with moments m, v. bias1/bias2 are the
  // precomputed corrections 1/(1-beta1^t) and 1/(1-beta2^t).
  void (*adam_update)(std::size_t n, double* param, const double* grad,
                      double* m, double* v, double beta1, double beta2,
                      double eps, double lr, double bias1, double bias2);
};

// Active backend ops. First call resolves the backend: FPLOC_KERNELS
// ("scalar" | "avx2") if set, otherwise the best available for this CPU.
const Ops& active();
Backend active_backend();

bool available(Backend b);
void select_backend(Backend b);  // throws ConfigError if unavailable
const Ops& ops(Backend b);       // direct access, for equivalence tests
const char* backend_name(Backend b);
Backend detect_best();

}  // namespace fploc::kern
