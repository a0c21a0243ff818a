#pragma once

#include <span>
#include <vector>

#include "fploc/matrix.hpp"

namespace fploc {

// Element-wise max(0, x); shape preserved.
Matrix relu(const Matrix& x);

// out[i] = pre[i] > 0 ? grad[i] : 0. Subgradient at 0 is 0.
Matrix relu_backward(const Matrix& pre, const Matrix& grad);

// Max-subtracted softmax; any finite input is safe. Entries positive,
// sum 1 within 1e-9.
void softmax_row_inplace(std::span<double> z);
std::vector<double> softmax_row(std::span<const double> z);

// Row-wise softmax of a logits matrix (one row per sample).
Matrix softmax_rows(const Matrix& logits);

// -log(probs[target] + 1e-12). Throws ValidationError on a target index
// outside [0, K).
double cross_entropy(std::span<const double> probs, std::size_t target);

inline constexpr double kProbClip = 1e-12;

}  // namespace fploc
