#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fploc/data.hpp"
#include "fploc/graph.hpp"
#include "fploc/model.hpp"

namespace fploc {

enum class ModelKind : std::uint8_t { Gcn = 0, BaselineDnn = 1 };

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

// Everything inference needs, self-contained: parameters, the AP graph
// (GCN), the RP coordinate table, and the normalization scheme that was
// applied during training.
struct TrainedModel {
  ModelKind kind = ModelKind::Gcn;
  std::size_t n_ap = 0;
  std::size_t n_s = 1;
  std::size_t n_classes = 0;
  NormScheme normalization = NormScheme::MinMax110;
  MlpInput mlp_input = MlpInput::Difference;
  AdjacencyMethod adjacency_method = AdjacencyMethod::CoDetectionProbability;
  std::uint64_t adjacency_hash = 0;  // fnv1a64 over adjacency bytes
  GcnParams gcn;   // kind == Gcn
  ApGraph graph;   // kind == Gcn
  DnnParams dnn;   // kind == BaselineDnn
  std::vector<RpEntry> rp_table;
};

std::uint64_t adjacency_content_hash(const Matrix& adjacency);

// Versioned binary container (magic FPMA); round trips are bit-exact for
// every stored matrix. The propagation matrix is rebuilt from the stored
// adjacency on load.
void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

// Class probabilities (one row per sample) for raw dBm fingerprints; the
// model's own normalization scheme is applied internally.
Matrix predict_probs(const TrainedModel& model,
                     std::span<const Matrix> raw_rssi);

}  // namespace fploc
