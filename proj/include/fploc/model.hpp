#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fploc/data.hpp"
#include "fploc/graph.hpp"
#include "fploc/matrix.hpp"
#include "fploc/rng.hpp"

namespace fploc {

// What the MLP sees: the difference feature X - X^(2) (default), or the
// concatenation [X | X^(1) | X^(2)].
enum class MlpInput : std::uint8_t { Difference = 0, Concat = 1 };

const char* mlp_input_name(MlpInput m);
MlpInput mlp_input_from_name(const std::string& name);

// --- shared fully-connected stack --------------------------------------------

// ReLU between layers, softmax after the last. Biases are 1 x out rows.
struct FcStack {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;

  std::size_t input_dim() const { return weights.front().rows(); }
  std::size_t output_dim() const { return weights.back().cols(); }
};

struct FcTrace {
  Matrix input;             // B x in
  std::vector<Matrix> pre;  // pre-activations per layer
  std::vector<Matrix> act;  // activations; act.back() are the probabilities
};

struct FcGrads {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
};

// widths = {in, hidden..., K}; weights Glorot-uniform, biases zero.
FcStack make_fc_stack(std::span<const std::size_t> widths, Rng& rng);
FcTrace fc_forward(const FcStack& stack, Matrix input);
// Gradient of the mean cross-entropy over the batch. input_grad, when
// non-null, receives d(loss)/d(input).
FcGrads fc_backward(const FcStack& stack, const FcTrace& trace,
                    std::span<const std::size_t> targets, Matrix* input_grad);

double mean_cross_entropy(const Matrix& probs,
                          std::span<const std::size_t> targets);
std::size_t count_correct(const Matrix& probs,
                          std::span<const std::size_t> targets);

// --- GCN + MLP model ----------------------------------------------------------

struct GcnConfig {
  std::size_t n_ap = 0;
  std::size_t n_s = 1;
  std::size_t n_classes = 0;
  MlpInput mlp_input = MlpInput::Difference;
};

// Two graph-convolution weight matrices (n_s x n_s) and the three-layer
// MLP head: N n_s -> 64 -> 32 -> K (input tripled for the concat variant).
struct GcnParams {
  Matrix theta0;
  Matrix theta1;
  FcStack mlp;
};

inline constexpr std::size_t kMlpHidden1 = 64;
inline constexpr std::size_t kMlpHidden2 = 32;

GcnParams init_gcn_params(const GcnConfig& config, Rng& rng);

// One graph convolution: ReLU(propagation * x * theta); x is N x n_s.
Matrix gcn_layer(const Matrix& x, const ApGraph& graph, const Matrix& theta);

// Cached intermediates of one batched forward pass. Graph-stage matrices are
// stored transposed: row block i (n_s rows) holds sample i's N-column
// feature, so the propagation product is a single contiguous GEMM.
struct ForwardTrace {
  std::size_t batch = 0;
  std::size_t n_ap = 0;
  std::size_t n_s = 0;
  MlpInput mlp_input = MlpInput::Difference;
  Matrix input_r;  // (B n_s) x N
  Matrix ax_r;     // input * propagation
  Matrix pre1_r, x1_r;
  Matrix ax1_r;
  Matrix pre2_r, x2_r;
  Matrix skip_r;   // difference variant only: input_r - x2_r
  FcTrace mlp;

  const Matrix& probs() const { return mlp.act.back(); }
  std::span<const double> probs_row(std::size_t i) const {
    return mlp.act.back().row_span(i);
  }
};

struct GcnGrads {
  Matrix theta0;
  Matrix theta1;
  FcGrads mlp;
};

ForwardTrace forward(std::span<const Matrix> xs, const ApGraph& graph,
                     const GcnParams& params, MlpInput variant);
ForwardTrace forward(const Matrix& x, const ApGraph& graph,
                     const GcnParams& params,
                     MlpInput variant = MlpInput::Difference);

// Gradients of the mean cross-entropy for the batch the trace was built
// from. Throws ValidationError on a trace that does not match the given
// graph/params/targets.
GcnGrads backward(const ForwardTrace& trace,
                  std::span<const std::size_t> targets, const ApGraph& graph,
                  const GcnParams& params);

// --- baseline DNN ---------------------------------------------------------------

// Four FC layers on the flattened raw fingerprint: N n_s -> 256 -> 128 ->
// 64 -> K.
struct DnnParams {
  FcStack fc;
};

inline constexpr std::size_t kDnnHidden[3] = {256, 128, 64};

DnnParams init_dnn_params(std::size_t n_inputs, std::size_t n_classes,
                          Rng& rng);
// Row-major per-sample flatten; index = ap * n_s + slot.
Matrix flatten_rows(std::span<const Matrix> xs);
FcTrace dnn_forward(std::span<const Matrix> xs, const DnnParams& params);
FcGrads dnn_backward(const DnnParams& params, const FcTrace& trace,
                     std::span<const std::size_t> targets);

// --- likelihood decoding ---------------------------------------------------------

struct Location {
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
  int building = 0;
};

// Planar coordinates are the probability-weighted sum of RP coordinates;
// floor and building come from the argmax RP (ties -> lowest index).
Location decode_location(std::span<const double> probs,
                         std::span<const RpEntry> rp_table);

}  // namespace fploc
