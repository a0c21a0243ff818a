#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fploc {

// Dense row-major matrix of doubles. Values are finite after every public
// operation; matmul and the model layers scan their outputs, elementwise
// ops preserve finiteness of finite inputs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  double* row(std::size_t r) noexcept { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const noexcept {
    return data_.data() + r * cols_;
  }
  std::span<double> row_span(std::size_t r) noexcept {
    return {row(r), cols_};
  }
  std::span<const double> row_span(std::size_t r) const noexcept {
    return {row(r), cols_};
  }
  std::span<double> values() noexcept { return {data_.data(), data_.size()}; }
  std::span<const double> values() const noexcept {
    return {data_.data(), data_.size()};
  }

  bool same_shape(const Matrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  std::string shape_str() const;  // e.g. "3x4"

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Throws ShapeError naming both shapes on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b and a * b^T (transpose materialized; cheap next to the product).
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& m, double alpha);
void add_inplace(Matrix& a, const Matrix& b);
void axpy_inplace(Matrix& y, double alpha, const Matrix& x);

double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool exactly_equal(const Matrix& a, const Matrix& b);

// Throws NumericError("<context>: ...") naming the first offending entry.
void ensure_finite(const Matrix& m, std::string_view context);

}  // namespace fploc
