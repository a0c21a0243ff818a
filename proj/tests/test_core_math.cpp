// core_math: matrix ops, activations, loss, Adam, finite differences.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "fploc/activations.hpp"
#include "fploc/adam.hpp"
#include "fploc/exceptions.hpp"
#include "fploc/grad_check.hpp"
#include "fploc/matrix.hpp"
#include "fploc/rng.hpp"

#include "test_util.hpp"

using namespace fploc;
using test::random_matrix;

TEST_CASE("matmul: identity and forced products") {
  Rng rng(1);
  const Matrix m = random_matrix(3, 3, rng);
  CHECK(max_abs_diff(matmul(Matrix::identity(3), m), m) == 0.0);

  const Matrix a(2, 2, {1, 2, 3, 4});
  const Matrix b(2, 1, {0, 1});
  const Matrix c = matmul(a, b);
  CHECK(c(0, 0) == 2.0);
  CHECK(c(1, 0) == 4.0);
}

TEST_CASE("matmul: random product matches a triple-loop oracle") {
  Rng rng(2);
  const Matrix a = random_matrix(7, 5, rng);
  const Matrix b = random_matrix(5, 3, rng);
  const Matrix got = matmul(a, b);
  Matrix want(7, 3);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) s += a(i, k) * b(k, j);
      want(i, j) = s;
    }
  }
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("matmul: shape error names both shapes") {
  const Matrix a(3, 4);
  const Matrix b(5, 2);
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       "matmul: dimension mismatch (lhs 3x4, rhs 5x2)",
                       ShapeError);
}

TEST_CASE("matmul: associativity on random triples") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 1 + rng.index(16);
    const std::size_t k1 = 1 + rng.index(16);
    const std::size_t k2 = 1 + rng.index(16);
    const std::size_t n = 1 + rng.index(16);
    const Matrix a = random_matrix(m, k1, rng);
    const Matrix b = random_matrix(k1, k2, rng);
    const Matrix c = random_matrix(k2, n, rng);
    CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) <
          1e-9);
  }
}

TEST_CASE("relu: sign cases") {
  const Matrix x(1, 3, {-1, 0, 2});
  const Matrix y = relu(x);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);
  CHECK(y(0, 2) == 2.0);

  Rng rng(4);
  const Matrix pos = random_matrix(3, 4, rng, 0.0, 5.0);
  CHECK(exactly_equal(relu(pos), pos));
  const Matrix neg = random_matrix(3, 4, rng, -5.0, -0.01);
  CHECK(max_abs(relu(neg)) == 0.0);
}

TEST_CASE("softmax: forced values and invariants") {
  const auto uniform = softmax_row(std::vector<double>{3.0, 3.0, 3.0, 3.0});
  for (double p : uniform) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));

  const auto big = softmax_row(std::vector<double>{1000.0, 1000.0});
  CHECK(big[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(big[1] == doctest::Approx(0.5).epsilon(1e-12));

  const auto skew = softmax_row(std::vector<double>{0.0, std::log(3.0)});
  CHECK(skew[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(skew[1] == doctest::Approx(0.75).epsilon(1e-9));

  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t k = 1 + rng.index(12);
    std::vector<double> z(k);
    for (double& v : z) v = rng.uniform(-30.0, 30.0);
    const auto p = softmax_row(z);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);

    // invariance under constant logit shift
    auto shifted = z;
    for (double& v : shifted) v += 13.25;
    const auto p2 = softmax_row(shifted);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(std::fabs(p[i] - p2[i]) < 1e-12);
    }
  }
}

TEST_CASE("cross_entropy: forced values and the log-sum-exp identity") {
  std::vector<double> onehot{0.0, 1.0, 0.0};
  CHECK(cross_entropy(onehot, 1) <= 1e-11);
  CHECK(cross_entropy(onehot, 1) >= 0.0);

  std::vector<double> uniform(5, 0.2);
  CHECK(cross_entropy(uniform, 3) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-9));

  std::vector<double> p{0.1, 0.9};
  CHECK(cross_entropy(p, 0) == doctest::Approx(std::log(10.0)).epsilon(1e-9));

  CHECK_THROWS_AS(cross_entropy(p, 2), ValidationError);

  // moderate logits: the 1e-12 clip inside cross_entropy perturbs the
  // identity by clip/p, which stays under 1e-9 for p >~ 1e-3
  Rng rng(6);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t k = 2 + rng.index(8);
    std::vector<double> z(k);
    for (double& v : z) v = rng.uniform(-2.0, 2.0);
    const std::size_t target = rng.index(k);
    // independent log-sum-exp route
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - zmax);
    lse = zmax + std::log(lse);
    CHECK(std::fabs(cross_entropy(softmax_row(z), target) -
                    (lse - z[target])) < 1e-9);
  }
}

TEST_CASE("adam: fixed point, first step, quadratic convergence") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;

  // zero gradient, zero moments -> unchanged
  {
    Matrix w(1, 1, {0.7});
    AdamState state(1, 1, cfg);
    state.step(w, Matrix(1, 1));
    CHECK(w(0, 0) == 0.7);
    CHECK(state.steps() == 1);
  }

  // first step moves opposite to sign(g) by ~lr
  {
    Matrix w(1, 2, {0.0, 0.0});
    AdamState state(1, 2, cfg);
    state.step(w, Matrix(1, 2, {0.5, -2.0}));
    CHECK(w(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(w(0, 1) == doctest::Approx(0.1).epsilon(1e-6));
  }

  // 100 steps on f(w)=w^2 from w=1 reaches |w| < 0.1; verify against the
  // scalar recurrence run independently
  {
    Matrix w(1, 1, {1.0});
    AdamState state(1, 1, cfg);
    double wr = 1.0, mr = 0.0, vr = 0.0;
    for (int t = 1; t <= 100; ++t) {
      const Matrix g(1, 1, {2.0 * w(0, 0)});
      const double gr = 2.0 * wr;
      state.step(w, g);
      mr = 0.9 * mr + 0.1 * gr;
      vr = 0.999 * vr + 0.001 * gr * gr;
      const double mhat = mr / (1.0 - std::pow(0.9, t));
      const double vhat = vr / (1.0 - std::pow(0.999, t));
      wr -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    }
    CHECK(std::fabs(w(0, 0)) < 0.1);
    CHECK(w(0, 0) == doctest::Approx(wr).epsilon(1e-12));
  }
}

TEST_CASE("adam: shape mismatch and determinism") {
  AdamState state(2, 2);
  Matrix w(2, 3);
  CHECK_THROWS_AS(state.step(w, Matrix(2, 3)), ShapeError);

  // identical (param, grad sequence) -> bit-identical trajectories
  Rng rng(7);
  const Matrix w0 = random_matrix(3, 4, rng);
  std::vector<Matrix> grads;
  for (int i = 0; i < 10; ++i) grads.push_back(random_matrix(3, 4, rng));
  Matrix wa = w0;
  Matrix wb = w0;
  AdamState sa(3, 4), sb(3, 4);
  for (const auto& g : grads) {
    sa.step(wa, g);
    sb.step(wb, g);
    CHECK(exactly_equal(wa, wb));
  }
}

TEST_CASE("finite_diff_grad: analytic derivatives") {
  auto sum_squares = [](const Matrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += v * v;
    return s;
  };
  const Matrix x(1, 2, {1.0, 2.0});
  const Matrix g = finite_diff_grad(sum_squares, x);
  CHECK(g(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(g(0, 1) == doctest::Approx(4.0).epsilon(1e-6));

  const Matrix zero_grad =
      finite_diff_grad([](const Matrix&) { return 3.5; }, x);
  CHECK(max_abs(zero_grad) < 1e-9);

  CHECK_THROWS_AS(finite_diff_grad(sum_squares, x, 0.0), ValidationError);
}

TEST_CASE("matrix: finiteness guard and constructors") {
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), ShapeError);
  Matrix bad(1, 2, {1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(ensure_finite(bad, "test"), NumericError);
}
