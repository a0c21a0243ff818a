#pragma once

#include <cstdint>

#include "fploc/matrix.hpp"

namespace fploc {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;
};

// First/second-moment accumulators for one parameter matrix. Single-owner
// mutable: exactly one trainer thread drives step().
class AdamState {
 public:
  AdamState(std::size_t rows, std::size_t cols, AdamConfig cfg = {});

  // Standard bias-corrected Adam update, in place. Deterministic; throws
  // ShapeError if param/grad do not match the tracked shape.
  void step(Matrix& param, const Matrix& grad);

  std::int64_t steps() const noexcept { return steps_; }
  const Matrix& first_moment() const noexcept { return m_; }
  const Matrix& second_moment() const noexcept { return v_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  Matrix m_, v_;
  std::int64_t steps_ = 0;
  AdamConfig cfg_;
};

}  // namespace fploc
