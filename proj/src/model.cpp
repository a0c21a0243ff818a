#include "fploc/model.hpp"

#include <algorithm>
#include <cmath>

#include "fploc/activations.hpp"
#include "fploc/exceptions.hpp"
#include "fploc/kernels.hpp"

namespace fploc {

const char* mlp_input_name(MlpInput m) {
  switch (m) {
    case MlpInput::Difference: return "difference";
    case MlpInput::Concat: return "concat";
  }
  return "?";
}

MlpInput mlp_input_from_name(const std::string& name) {
  if (name == "difference") return MlpInput::Difference;
  if (name == "concat") return MlpInput::Concat;
  throw ConfigError("unknown mlp input variant '" + name +
                    "' (expected 'difference' or 'concat')");
}

namespace {

Matrix glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

// Graph-convolution weights start small and positive. Features and the
// propagation matrix are both nonnegative, so a theta drawn negative makes
// ReLU(A~ X theta) identically zero with zero gradient and the branch
// stays dead forever. A theta product near 1 is the opposite hazard: the
// two-layer filter gain approaches identity and the difference feature
// X - X^(2) annihilates the signal, stalling training at the uniform
// output. Spectral radius of the propagation is at most 2 per layer, so
// entries in (0.05, 0.35) keep the initial gain well below identity.
Matrix theta_init_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(0.05, 0.35);
  return m;
}

// out = bias row added to every row of z
void add_bias_rows(Matrix& z, const Matrix& bias) {
  for (std::size_t r = 0; r < z.rows(); ++r) {
    kern::active().axpy(z.cols(), 1.0, bias.data(), z.row(r));
  }
}

}  // namespace

FcStack make_fc_stack(std::span<const std::size_t> widths, Rng& rng) {
  FcStack stack;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    stack.weights.push_back(glorot_matrix(widths[l], widths[l + 1], rng));
    stack.biases.emplace_back(1, widths[l + 1]);
  }
  return stack;
}

FcTrace fc_forward(const FcStack& stack, Matrix input) {
  FcTrace trace;
  trace.input = std::move(input);
  const Matrix* current = &trace.input;
  for (std::size_t l = 0; l < stack.weights.size(); ++l) {
    Matrix z = matmul(*current, stack.weights[l]);
    add_bias_rows(z, stack.biases[l]);
    const bool last = l + 1 == stack.weights.size();
    Matrix a = last ? softmax_rows(z) : relu(z);
    ensure_finite(a, "fc layer " + std::to_string(l + 1));
    trace.pre.push_back(std::move(z));
    trace.act.push_back(std::move(a));
    current = &trace.act.back();
  }
  return trace;
}

FcGrads fc_backward(const FcStack& stack, const FcTrace& trace,
                    std::span<const std::size_t> targets, Matrix* input_grad) {
  const std::size_t layers = stack.weights.size();
  if (trace.act.size() != layers) {
    throw ValidationError("fc_backward: trace does not match stack depth");
  }
  const Matrix& probs = trace.act.back();
  if (targets.size() != probs.rows()) {
    throw ValidationError("fc_backward: batch size " +
                          std::to_string(probs.rows()) + " != targets " +
                          std::to_string(targets.size()));
  }
  const double inv_batch = 1.0 / static_cast<double>(targets.size());

  // softmax + cross-entropy: d(logits) = (p - onehot) / B
  Matrix delta = probs;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= probs.cols()) {
      throw ValidationError("fc_backward: label " +
                            std::to_string(targets[i]) +
                            " out of range for K=" +
                            std::to_string(probs.cols()));
    }
    delta(i, targets[i]) -= 1.0;
  }
  kern::active().scale(delta.size(), inv_batch, delta.data());

  FcGrads grads;
  grads.weights.resize(layers);
  grads.biases.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& below = l == 0 ? trace.input : trace.act[l - 1];
    grads.weights[l] = matmul_tn(below, delta);
    Matrix bias_grad(1, delta.cols());
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      kern::active().axpy(delta.cols(), 1.0, delta.row(r), bias_grad.data());
    }
    grads.biases[l] = std::move(bias_grad);
    if (l == 0) {
      if (input_grad != nullptr) {
        *input_grad = matmul_nt(delta, stack.weights[l]);
      }
    } else {
      Matrix upstream = matmul_nt(delta, stack.weights[l]);
      delta = relu_backward(trace.pre[l - 1], upstream);
    }
  }
  return grads;
}

double mean_cross_entropy(const Matrix& probs,
                          std::span<const std::size_t> targets) {
  if (targets.size() != probs.rows()) {
    throw ValidationError("mean_cross_entropy: batch size mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    sum += cross_entropy(probs.row_span(i), targets[i]);
  }
  return sum / static_cast<double>(targets.size());
}

std::size_t count_correct(const Matrix& probs,
                          std::span<const std::size_t> targets) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto row = probs.row_span(i);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (row[k] > row[best]) best = k;
    }
    if (best == targets[i]) ++correct;
  }
  return correct;
}

// --- GCN ------------------------------------------------------------------------

GcnParams init_gcn_params(const GcnConfig& config, Rng& rng) {
  if (config.n_ap == 0 || config.n_s == 0 || config.n_classes == 0) {
    throw ValidationError("init_gcn_params: n_ap, n_s, n_classes must be > 0");
  }
  GcnParams params;
  params.theta0 = theta_init_matrix(config.n_s, config.n_s, rng);
  params.theta1 = theta_init_matrix(config.n_s, config.n_s, rng);
  const std::size_t feat =
      config.n_ap * config.n_s *
      (config.mlp_input == MlpInput::Concat ? 3 : 1);
  const std::size_t widths[] = {feat, kMlpHidden1, kMlpHidden2,
                                config.n_classes};
  params.mlp = make_fc_stack(widths, rng);
  return params;
}

Matrix gcn_layer(const Matrix& x, const ApGraph& graph, const Matrix& theta) {
  if (x.rows() != graph.n_ap) {
    throw ShapeError("gcn_layer: signal rows " + std::to_string(x.rows()) +
                     " != graph N " + std::to_string(graph.n_ap));
  }
  if (theta.rows() != x.cols() || theta.cols() != x.cols()) {
    throw ShapeError("gcn_layer: theta " + theta.shape_str() +
                     " does not match n_s " + std::to_string(x.cols()));
  }
  return relu(matmul(matmul(graph.propagation, x), theta));
}

namespace {

// Per-sample left-multiply of every n_s-row block: out_i = theta * src_i.
Matrix blockwise_left_mul(const Matrix& theta, const Matrix& src,
                          std::size_t n_s) {
  if (n_s == 1) return scaled(src, theta(0, 0));
  const std::size_t batch = src.rows() / n_s;
  Matrix out(src.rows(), src.cols());
  for (std::size_t i = 0; i < batch; ++i) {
    kern::active().gemm(n_s, n_s, src.cols(), theta.data(),
                        src.row(i * n_s), out.row(i * n_s), false);
  }
  return out;
}

// sum over samples of a_i * b_i^T, each block n_s x N -> n_s x n_s.
Matrix accumulate_block_outer(const Matrix& a, const Matrix& b,
                              std::size_t n_s) {
  Matrix out(n_s, n_s);
  const std::size_t batch = a.rows() / n_s;
  if (n_s == 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      s += kern::active().dot(a.cols(), a.row(i), b.row(i));
    }
    out(0, 0) = s;
    return out;
  }
  Matrix bt(b.cols(), n_s);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t r = 0; r < n_s; ++r) {
      for (std::size_t c = 0; c < b.cols(); ++c) {
        bt(c, r) = b(i * n_s + r, c);
      }
    }
    kern::active().gemm(n_s, b.cols(), n_s, a.row(i * n_s), bt.data(),
                        out.data(), true);
  }
  return out;
}

// (B n_s) x N transposed blocks -> B x (N n_s) flattened rows
// (flat index = ap * n_s + slot).
Matrix gather_flatten(const Matrix& src, std::size_t batch, std::size_t n_s) {
  if (n_s == 1) return src;
  const std::size_t n = src.cols();
  Matrix out(batch, n * n_s);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t slot = 0; slot < n_s; ++slot) {
      for (std::size_t ap = 0; ap < n; ++ap) {
        out(i, ap * n_s + slot) = src(i * n_s + slot, ap);
      }
    }
  }
  return out;
}

// inverse of gather_flatten for a feature-column range of dF
Matrix scatter_unflatten(const Matrix& flat, std::size_t col_offset,
                         std::size_t batch, std::size_t n, std::size_t n_s) {
  Matrix out(batch * n_s, n);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t slot = 0; slot < n_s; ++slot) {
      for (std::size_t ap = 0; ap < n; ++ap) {
        out(i * n_s + slot, ap) = flat(i, col_offset + ap * n_s + slot);
      }
    }
  }
  return out;
}

Matrix pack_transposed(std::span<const Matrix> xs, std::size_t n,
                       std::size_t n_s) {
  Matrix packed(xs.size() * n_s, n);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Matrix& x = xs[i];
    if (x.rows() != n || x.cols() != n_s) {
      throw ShapeError("forward: sample " + std::to_string(i) + " is " +
                       x.shape_str() + ", expected " + std::to_string(n) +
                       "x" + std::to_string(n_s));
    }
    for (std::size_t ap = 0; ap < n; ++ap) {
      for (std::size_t slot = 0; slot < n_s; ++slot) {
        packed(i * n_s + slot, ap) = x(ap, slot);
      }
    }
  }
  return packed;
}

}  // namespace

ForwardTrace forward(std::span<const Matrix> xs, const ApGraph& graph,
                     const GcnParams& params, MlpInput variant) {
  if (xs.empty()) throw ValidationError("forward: empty batch");
  const std::size_t n = graph.n_ap;
  const std::size_t n_s = params.theta0.rows();

  ForwardTrace t;
  t.batch = xs.size();
  t.n_ap = n;
  t.n_s = n_s;
  t.mlp_input = variant;

  t.input_r = pack_transposed(xs, n, n_s);
  ensure_finite(t.input_r, "forward input");

  t.ax_r = matmul(t.input_r, graph.propagation);
  t.pre1_r = blockwise_left_mul(transpose(params.theta0), t.ax_r, n_s);
  t.x1_r = relu(t.pre1_r);
  ensure_finite(t.x1_r, "gcn layer 1");

  t.ax1_r = matmul(t.x1_r, graph.propagation);
  t.pre2_r = blockwise_left_mul(transpose(params.theta1), t.ax1_r, n_s);
  t.x2_r = relu(t.pre2_r);
  ensure_finite(t.x2_r, "gcn layer 2");

  Matrix features;
  if (variant == MlpInput::Difference) {
    t.skip_r = sub(t.input_r, t.x2_r);
    features = gather_flatten(t.skip_r, t.batch, n_s);
  } else {
    const std::size_t block = n * n_s;
    features = Matrix(t.batch, 3 * block);
    const Matrix fx = gather_flatten(t.input_r, t.batch, n_s);
    const Matrix f1 = gather_flatten(t.x1_r, t.batch, n_s);
    const Matrix f2 = gather_flatten(t.x2_r, t.batch, n_s);
    for (std::size_t i = 0; i < t.batch; ++i) {
      std::copy_n(fx.row(i), block, features.row(i));
      std::copy_n(f1.row(i), block, features.row(i) + block);
      std::copy_n(f2.row(i), block, features.row(i) + 2 * block);
    }
  }
  if (features.cols() != params.mlp.input_dim()) {
    throw ShapeError("forward: feature width " +
                     std::to_string(features.cols()) +
                     " != mlp input " +
                     std::to_string(params.mlp.input_dim()));
  }
  t.mlp = fc_forward(params.mlp, std::move(features));
  return t;
}

ForwardTrace forward(const Matrix& x, const ApGraph& graph,
                     const GcnParams& params, MlpInput variant) {
  return forward(std::span<const Matrix>(&x, 1), graph, params, variant);
}

GcnGrads backward(const ForwardTrace& trace,
                  std::span<const std::size_t> targets, const ApGraph& graph,
                  const GcnParams& params) {
  const std::size_t n = trace.n_ap;
  const std::size_t n_s = trace.n_s;
  if (graph.n_ap != n || params.theta0.rows() != n_s ||
      trace.batch != targets.size() || trace.batch == 0) {
    throw ValidationError("backward: trace does not match graph/params/targets");
  }

  GcnGrads grads;
  Matrix d_features;
  grads.mlp = fc_backward(params.mlp, trace.mlp, targets, &d_features);

  Matrix d_x2_r;
  Matrix d_x1_direct;
  if (trace.mlp_input == MlpInput::Difference) {
    // skip connection: d(skip)/d(x2) = -I
    Matrix d_skip = scatter_unflatten(d_features, 0, trace.batch, n, n_s);
    d_x2_r = scaled(d_skip, -1.0);
  } else {
    const std::size_t block = n * n_s;
    d_x1_direct = scatter_unflatten(d_features, block, trace.batch, n, n_s);
    d_x2_r = scatter_unflatten(d_features, 2 * block, trace.batch, n, n_s);
  }

  const Matrix d_pre2 = relu_backward(trace.pre2_r, d_x2_r);
  grads.theta1 = accumulate_block_outer(trace.ax1_r, d_pre2, n_s);

  Matrix d_x1_r =
      matmul(blockwise_left_mul(params.theta1, d_pre2, n_s), graph.propagation);
  if (trace.mlp_input == MlpInput::Concat) {
    add_inplace(d_x1_r, d_x1_direct);
  }

  const Matrix d_pre1 = relu_backward(trace.pre1_r, d_x1_r);
  grads.theta0 = accumulate_block_outer(trace.ax_r, d_pre1, n_s);
  return grads;
}

// --- baseline DNN -----------------------------------------------------------------

DnnParams init_dnn_params(std::size_t n_inputs, std::size_t n_classes,
                          Rng& rng) {
  if (n_inputs == 0 || n_classes == 0) {
    throw ValidationError("init_dnn_params: sizes must be > 0");
  }
  const std::size_t widths[] = {n_inputs, kDnnHidden[0], kDnnHidden[1],
                                kDnnHidden[2], n_classes};
  return DnnParams{make_fc_stack(widths, rng)};
}

Matrix flatten_rows(std::span<const Matrix> xs) {
  if (xs.empty()) throw ValidationError("flatten_rows: empty batch");
  const std::size_t n = xs[0].rows();
  const std::size_t n_s = xs[0].cols();
  Matrix out(xs.size(), n * n_s);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].rows() != n || xs[i].cols() != n_s) {
      throw ShapeError("flatten_rows: sample " + std::to_string(i) +
                       " shape mismatch");
    }
    std::copy_n(xs[i].data(), n * n_s, out.row(i));
  }
  return out;
}

FcTrace dnn_forward(std::span<const Matrix> xs, const DnnParams& params) {
  Matrix input = flatten_rows(xs);
  ensure_finite(input, "dnn input");
  if (input.cols() != params.fc.input_dim()) {
    throw ShapeError("dnn_forward: input width " +
                     std::to_string(input.cols()) + " != " +
                     std::to_string(params.fc.input_dim()));
  }
  return fc_forward(params.fc, std::move(input));
}

FcGrads dnn_backward(const DnnParams& params, const FcTrace& trace,
                     std::span<const std::size_t> targets) {
  return fc_backward(params.fc, trace, targets, nullptr);
}

// --- decoding -----------------------------------------------------------------------

Location decode_location(std::span<const double> probs,
                         std::span<const RpEntry> rp_table) {
  if (probs.size() != rp_table.size()) {
    throw ShapeError("decode_location: " + std::to_string(probs.size()) +
                     " probabilities vs " + std::to_string(rp_table.size()) +
                     " reference points");
  }
  if (probs.empty()) {
    throw ValidationError("decode_location: empty RP table");
  }
  Location loc;
  std::size_t best = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    loc.x += probs[k] * rp_table[k].longitude;
    loc.y += probs[k] * rp_table[k].latitude;
    if (probs[k] > probs[best]) best = k;
  }
  loc.floor = rp_table[best].floor;
  loc.building = rp_table[best].building;
  return loc;
}

}  // namespace fploc
