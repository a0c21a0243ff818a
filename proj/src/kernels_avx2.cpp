// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; it must only be reached through the runtime dispatcher,
// which checks cpu support before handing out these function pointers.

#include "fploc/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace fploc::kern {

namespace {

// True when all four lanes are bitwise +0.0. Bitwise-OR over lanes treats
// -0.0 as nonzero, which only makes the skip conservative.
inline bool all_zero(__m256d v) {
  return _mm256_testz_si256(_mm256_castpd_si256(v), _mm256_castpd_si256(v));
}

// C block (kRows x 8) += A rows * B. a: first of kRows consecutive rows of A
// (row stride lda); b: B(0, j0); c: C(i0, j0).
template <int kRows>
inline void gemm_block8(std::size_t k, const double* a, std::size_t lda,
                        const double* b, std::size_t ldb, double* c,
                        std::size_t ldc) {
  __m256d acc[kRows][2];
  for (int r = 0; r < kRows; ++r) {
    acc[r][0] = _mm256_loadu_pd(c + r * ldc);
    acc[r][1] = _mm256_loadu_pd(c + r * ldc + 4);
  }
  for (std::size_t kk = 0; kk < k; ++kk) {
    __m256d av[kRows];
    __m256d any = _mm256_setzero_pd();
    for (int r = 0; r < kRows; ++r) {
      av[r] = _mm256_broadcast_sd(a + r * lda + kk);
      any = _mm256_or_pd(any, av[r]);
    }
    if (all_zero(any)) continue;
    const __m256d b0 = _mm256_loadu_pd(b + kk * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + kk * ldb + 4);
    for (int r = 0; r < kRows; ++r) {
      acc[r][0] = _mm256_fmadd_pd(av[r], b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(av[r], b1, acc[r][1]);
    }
  }
  for (int r = 0; r < kRows; ++r) {
    _mm256_storeu_pd(c + r * ldc, acc[r][0]);
    _mm256_storeu_pd(c + r * ldc + 4, acc[r][1]);
  }
}

void gemm_avx2(std::size_t m, std::size_t k, std::size_t n, const double* a,
               const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  const std::size_t n8 = n & ~std::size_t(7);
  for (std::size_t i0 = 0; i0 < m; i0 += 4) {
    const std::size_t rows = std::min<std::size_t>(4, m - i0);
    const double* ablk = a + i0 * k;
    double* cblk = c + i0 * n;
    for (std::size_t j = 0; j < n8; j += 8) {
      switch (rows) {
        case 4: gemm_block8<4>(k, ablk, k, b + j, n, cblk + j, n); break;
        case 3: gemm_block8<3>(k, ablk, k, b + j, n, cblk + j, n); break;
        case 2: gemm_block8<2>(k, ablk, k, b + j, n, cblk + j, n); break;
        default: gemm_block8<1>(k, ablk, k, b + j, n, cblk + j, n); break;
      }
    }
    // column tail, same loop order as the scalar reference
    if (n8 < n) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* arow = ablk + r * k;
        double* crow = cblk + r * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double av = arow[kk];
          if (av == 0.0) continue;
          const double* brow = b + kk * n;
          for (std::size_t j = n8; j < n; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  double lanes[4];
  _mm256_storeu_pd(lanes, acc0);
  double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(std::size_t n, double alpha, double* x) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

void add_avx2(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void sub_avx2(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void relu_avx2(std::size_t n, const double* x, double* out) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(std::size_t n, const double* pre, const double* grad,
                        double* out) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask =
        _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(mask, _mm256_loadu_pd(grad + i)));
  }
  for (; i < n; ++i) out[i] = pre[i] > 0.0 ? grad[i] : 0.0;
}

void adam_avx2(std::size_t n, double* param, const double* grad, double* m,
               double* v, double beta1, double beta2, double eps, double lr,
               double bias1, double bias2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d vc1 = _mm256_set1_pd(bias1);
  const __m256d vc2 = _mm256_set1_pd(bias2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d mi = _mm256_loadu_pd(m + i);
    __m256d vi = _mm256_loadu_pd(v + i);
    mi = _mm256_add_pd(_mm256_mul_pd(vb1, mi), _mm256_mul_pd(v1mb1, g));
    vi = _mm256_add_pd(_mm256_mul_pd(vb2, vi),
                       _mm256_mul_pd(v1mb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_mul_pd(mi, vc1);
    const __m256d denom =
        _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, vc2)), veps);
    const __m256d upd = _mm256_mul_pd(vlr, _mm256_div_pd(mhat, denom));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), upd));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    param[i] -= lr * (m[i] * bias1) / (std::sqrt(v[i] * bias2) + eps);
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops = {
      "avx2",     gemm_avx2, dot_avx2,  axpy_avx2,
      scale_avx2, add_avx2,  sub_avx2,  relu_avx2,
      relu_backward_avx2, adam_avx2,
  };
  return ops;
}

}  // namespace fploc::kern

#endif  // __AVX2__ && __FMA__
