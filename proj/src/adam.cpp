#include "fploc/adam.hpp"

#include <cmath>

#include "fploc/exceptions.hpp"
#include "fploc/kernels.hpp"

namespace fploc {

AdamState::AdamState(std::size_t rows, std::size_t cols, AdamConfig cfg)
    : m_(rows, cols), v_(rows, cols), cfg_(cfg) {}

void AdamState::step(Matrix& param, const Matrix& grad) {
  if (!param.same_shape(m_) || !grad.same_shape(m_)) {
    throw ShapeError("adam_step: shape mismatch (state " + m_.shape_str() +
                     ", param " + param.shape_str() + ", grad " +
                     grad.shape_str() + ")");
  }
  ++steps_;
  const double bias1 = 1.0 / (1.0 - std::pow(cfg_.beta1, steps_));
  const double bias2 = 1.0 / (1.0 - std::pow(cfg_.beta2, steps_));
  kern::active().adam_update(param.size(), param.data(), grad.data(),
                             m_.data(), v_.data(), cfg_.beta1, cfg_.beta2,
                             cfg_.epsilon, cfg_.learning_rate, bias1, bias2);
  ensure_finite(param, "adam_step");
}

}  // namespace fploc
