#include "fploc/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fploc/exceptions.hpp"

namespace fploc {

const char* adjacency_method_name(AdjacencyMethod m) {
  switch (m) {
    case AdjacencyMethod::CoDetectionProbability: return "codetection";
    case AdjacencyMethod::InverseDistance: return "distance";
  }
  return "?";
}

AdjacencyMethod adjacency_method_from_name(const std::string& name) {
  if (name == "codetection") return AdjacencyMethod::CoDetectionProbability;
  if (name == "distance") return AdjacencyMethod::InverseDistance;
  throw ConfigError("unknown adjacency method '" + name +
                    "' (expected 'codetection' or 'distance')");
}

Matrix adjacency_from_codetection(const FingerprintDataset& dataset,
                                  double detect_threshold_dbm) {
  if (dataset.samples.empty()) {
    throw ValidationError("co-detection adjacency: empty dataset");
  }
  if (dataset.role != DatasetRole::Train) {
    throw ValidationError(
        "co-detection adjacency: must be built from the training set only");
  }
  const std::size_t n = dataset.n_ap;
  Matrix counts(n, n);
  std::vector<std::size_t> detected;
  detected.reserve(n);
  for (const auto& s : dataset.samples) {
    detected.clear();
    for (std::size_t a = 0; a < n; ++a) {
      bool hit = false;
      for (std::size_t t = 0; t < dataset.n_s && !hit; ++t) {
        hit = s.rssi(a, t) > detect_threshold_dbm;
      }
      if (hit) detected.push_back(a);
    }
    for (std::size_t i = 0; i < detected.size(); ++i) {
      for (std::size_t j = i + 1; j < detected.size(); ++j) {
        counts(detected[i], detected[j]) += 1.0;
      }
    }
  }
  const double m_train = static_cast<double>(dataset.samples.size());
  Matrix adj(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = counts(i, j) / m_train;
      adj(i, j) = p;
      adj(j, i) = p;
    }
  }
  return adj;
}

Matrix adjacency_from_distance(
    const std::vector<std::array<double, 3>>& ap_positions) {
  const std::size_t n = ap_positions.size();
  if (n < 2) {
    throw ValidationError("inverse-distance adjacency: need at least 2 APs");
  }
  Matrix adj(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = ap_positions[i][0] - ap_positions[j][0];
      const double dy = ap_positions[i][1] - ap_positions[j][1];
      const double dz = ap_positions[i][2] - ap_positions[j][2];
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (d < 1e-9) {
        throw ValidationError("inverse-distance adjacency: APs " +
                              std::to_string(i) + " and " + std::to_string(j) +
                              " are co-located");
      }
      adj(i, j) = 1.0 / d;
      adj(j, i) = 1.0 / d;
    }
  }
  return adj;
}

ApGraph build_propagation(Matrix adjacency, AdjacencyMethod method) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) {
    throw ValidationError("build_propagation: adjacency must be square, got " +
                          adjacency.shape_str());
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) {
      throw ValidationError("build_propagation: nonzero diagonal at node " +
                            std::to_string(i));
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (adjacency(i, j) != adjacency(j, i)) {
        throw ValidationError("build_propagation: asymmetric adjacency at (" +
                              std::to_string(i) + "," + std::to_string(j) +
                              ")");
      }
      if (adjacency(i, j) < 0.0) {
        throw ValidationError("build_propagation: negative weight at (" +
                              std::to_string(i) + "," + std::to_string(j) +
                              ")");
      }
    }
  }

  ApGraph g;
  g.n_ap = n;
  g.method = method;
  g.degree.resize(n);
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += adjacency(i, j);
    g.degree[i] = d;
    // isolated nodes keep only the identity self-loop
    inv_sqrt[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  Matrix prop(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    prop(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = inv_sqrt[i] * adjacency(i, j) * inv_sqrt[j];
      prop(i, j) = v;
      prop(j, i) = v;  // mirrored, exactly symmetric
    }
  }
  g.adjacency = std::move(adjacency);
  g.propagation = std::move(prop);
  return g;
}

Matrix normalized_laplacian(const ApGraph& graph) {
  const std::size_t n = graph.n_ap;
  Matrix lap(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      lap(i, j) = (i == j ? 2.0 : 0.0) - graph.propagation(i, j);
    }
  }
  return lap;
}

SpectralDecomposition spectral_decompose(const Matrix& symmetric) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) {
    throw ValidationError("spectral_decompose: matrix must be square, got " +
                          symmetric.shape_str());
  }
  if (n > kMaxSpectralNodes) {
    throw ValidationError(
        "spectral_decompose: N=" + std::to_string(n) +
        " exceeds the dense verification-path limit of " +
        std::to_string(kMaxSpectralNodes));
  }

  // Cyclic Jacobi sweeps until the off-diagonal mass is negligible.
  Matrix a = symmetric;
  Matrix v = Matrix::identity(n);
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off < 1e-28 * (n > 0 ? n * n : 1)) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) /
            (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a(x, x) < a(y, y);
  });
  SpectralDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.eigenvalues[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) {
      out.eigenvectors(r, c) = v(r, order[c]);
    }
  }
  return out;
}

Matrix spectral_oracle_filter(const ApGraph& graph, const Matrix& x,
                              double theta) {
  const std::size_t n = graph.n_ap;
  if (x.rows() != n) {
    throw ShapeError("spectral_oracle_filter: signal rows " +
                     std::to_string(x.rows()) + " != N " + std::to_string(n));
  }
  const auto dec = spectral_decompose(normalized_laplacian(graph));

  // Chebyshev terms on the rescaled spectrum (lambda_max taken as 2):
  // mu = 2*lambda/lambda_max - 1 = lambda - 1; T0 = 1, T1 = mu; shared
  // coefficient theta0 = theta, theta1 = -theta.
  std::vector<double> filter(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = dec.eigenvalues[i] - 1.0;
    const double t0 = 1.0;
    const double t1 = mu;
    filter[i] = theta * t0 + (-theta) * t1;
  }

  Matrix projected = matmul_tn(dec.eigenvectors, x);  // U^T x
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < projected.cols(); ++c) {
      projected(i, c) *= filter[i];
    }
  }
  return matmul(dec.eigenvectors, projected);  // U (filter) U^T x
}

void write_adjacency_csv(const std::string& path, const Matrix& adjacency) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  char buf[40];
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    for (std::size_t j = 0; j < adjacency.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", adjacency(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Matrix read_adjacency_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t row_cols = 0;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      double v = 0.0;
      const auto [ptr, ec] =
          std::from_chars(line.data() + start, line.data() + end, v);
      if (ec != std::errc() || ptr != line.data() + end) {
        throw ParseError("adjacency csv: bad cell at row " +
                         std::to_string(rows + 1) + ", col " +
                         std::to_string(row_cols + 1));
      }
      values.push_back(v);
      ++row_cols;
      if (end == line.size()) break;
      start = end + 1;
    }
    if (rows == 0) {
      cols = row_cols;
    } else if (row_cols != cols) {
      throw ParseError("adjacency csv: ragged row " + std::to_string(rows + 1));
    }
    ++rows;
  }
  if (rows != cols) {
    throw ParseError("adjacency csv: matrix must be square, got " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Matrix(rows, cols, std::move(values));
}

}  // namespace fploc
