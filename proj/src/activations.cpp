#include "fploc/activations.hpp"

#include <algorithm>
#include <cmath>

#include "fploc/exceptions.hpp"
#include "fploc/kernels.hpp"

namespace fploc {

Matrix relu(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  kern::active().relu(x.size(), x.data(), out.data());
  return out;
}

Matrix relu_backward(const Matrix& pre, const Matrix& grad) {
  if (!pre.same_shape(grad)) {
    throw ShapeError("relu_backward: shape mismatch (pre " + pre.shape_str() +
                     ", grad " + grad.shape_str() + ")");
  }
  Matrix out(pre.rows(), pre.cols());
  kern::active().relu_backward(pre.size(), pre.data(), grad.data(),
                               out.data());
  return out;
}

void softmax_row_inplace(std::span<double> z) {
  if (z.empty()) return;
  double zmax = z[0];
  for (double v : z) zmax = std::max(zmax, v);
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

std::vector<double> softmax_row(std::span<const double> z) {
  std::vector<double> out(z.begin(), z.end());
  softmax_row_inplace(out);
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    softmax_row_inplace(out.row_span(r));
  }
  return out;
}

double cross_entropy(std::span<const double> probs, std::size_t target) {
  if (target >= probs.size()) {
    throw ValidationError("cross_entropy: label " + std::to_string(target) +
                          " out of range for K=" +
                          std::to_string(probs.size()));
  }
  // the clip can push -log marginally below zero at p ~= 1
  return std::max(0.0, -std::log(probs[target] + kProbClip));
}

}  // namespace fploc
