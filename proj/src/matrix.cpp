#include "fploc/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "fploc/exceptions.hpp"
#include "fploc/kernels.hpp"

namespace fploc {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix init: " + std::to_string(data_.size()) +
                     " values for shape " + shape_str());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch (lhs " +
                     a.shape_str() + ", rhs " + b.shape_str() + ")");
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: dimension mismatch (lhs " + a.shape_str() +
                     ", rhs " + b.shape_str() + ")");
  }
  Matrix c(a.rows(), b.cols());
  kern::active().gemm(a.rows(), a.cols(), b.cols(), a.data(), b.data(),
                      c.data(), false);
  ensure_finite(c, "matmul");
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  return matmul(transpose(a), b);
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  return matmul(a, transpose(b));
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  }
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out(a.rows(), a.cols());
  kern::active().add(a.size(), a.data(), b.data(), out.data());
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out(a.rows(), a.cols());
  kern::active().sub(a.size(), a.data(), b.data(), out.data());
  return out;
}

Matrix scaled(const Matrix& m, double alpha) {
  Matrix out = m;
  kern::active().scale(out.size(), alpha, out.data());
  return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add_inplace");
  kern::active().axpy(a.size(), 1.0, b.data(), a.data());
}

void axpy_inplace(Matrix& y, double alpha, const Matrix& x) {
  require_same_shape(y, x, "axpy_inplace");
  kern::active().axpy(y.size(), alpha, x.data(), y.data());
}

double max_abs(const Matrix& m) {
  double v = 0.0;
  for (double x : m.values()) v = std::max(v, std::fabs(x));
  return v;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double v = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    v = std::max(v, std::fabs(pa[i] - pb[i]));
  }
  return v;
}

bool exactly_equal(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (pa[i] != pb[i]) return false;
  }
  return true;
}

void ensure_finite(const Matrix& m, std::string_view context) {
  const double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(p[i])) {
      throw NumericError(std::string(context) + ": non-finite value at (" +
                         std::to_string(i / m.cols()) + "," +
                         std::to_string(i % m.cols()) + ")");
    }
  }
}

}  // namespace fploc
