#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fploc/data.hpp"
#include "fploc/matrix.hpp"

namespace fploc {

enum class AdjacencyMethod : std::uint8_t {
  CoDetectionProbability = 0,  // A_ij = N_ij / M_train
  InverseDistance = 1,         // A_ij = 1 / d_ij
};

const char* adjacency_method_name(AdjacencyMethod m);
AdjacencyMethod adjacency_method_from_name(const std::string& name);

// AP relationship graph. Immutable after construction; adjacency is exactly
// symmetric with zero diagonal, propagation = I + D^(-1/2) A D^(-1/2) is
// exactly symmetric (built mirrored). Rows of isolated nodes (degree 0)
// reduce to the identity row.
struct ApGraph {
  std::size_t n_ap = 0;
  Matrix adjacency;              // N x N
  std::vector<double> degree;    // row sums of adjacency
  Matrix propagation;            // N x N
  AdjacencyMethod method = AdjacencyMethod::CoDetectionProbability;
};

// A_ij = fraction of training samples in which APs i and j are both
// detected (any slot RSSI strictly above detect_threshold_dbm). Diagonal
// forced to 0; requires a non-empty training-role dataset.
Matrix adjacency_from_codetection(const FingerprintDataset& dataset,
                                  double detect_threshold_dbm = -110.0);

// A_ij = 1 / d_ij from AP coordinates in meters. Throws on co-located pairs
// (d < 1e-9), naming the pair.
Matrix adjacency_from_distance(
    const std::vector<std::array<double, 3>>& ap_positions);

// Validates (symmetric, nonnegative, zero diagonal) and assembles degrees
// and the propagation matrix.
ApGraph build_propagation(Matrix adjacency, AdjacencyMethod method);

// I - D^(-1/2) A D^(-1/2), i.e. 2I - propagation.
Matrix normalized_laplacian(const ApGraph& graph);

struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // orthonormal columns
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Verification-path
// only; guarded to N <= 64.
SpectralDecomposition spectral_decompose(const Matrix& symmetric);

inline constexpr std::size_t kMaxSpectralNodes = 64;

// Order-2 Chebyshev spectral filter of the graph signal x, computed through
// the eigendecomposition of the normalized Laplacian with lambda_max taken
// as 2 and a single shared coefficient theta (theta_0 = theta,
// theta_1 = -theta). Exists to assert equivalence with
// theta * propagation * x.
Matrix spectral_oracle_filter(const ApGraph& graph, const Matrix& x,
                              double theta);

// Headerless CSV of N x N floats, full double precision.
void write_adjacency_csv(const std::string& path, const Matrix& adjacency);
Matrix read_adjacency_csv(const std::string& path);

}  // namespace fploc
