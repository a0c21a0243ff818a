#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fploc/data.hpp"
#include "fploc/graph.hpp"
#include "fploc/model_io.hpp"

namespace fploc {

struct TrainingConfig {
  int epochs = 1500;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  ModelKind model = ModelKind::Gcn;
  AdjacencyMethod adjacency = AdjacencyMethod::CoDetectionProbability;
  double detect_threshold_dbm = -110.0;
  MlpInput mlp_input = MlpInput::Difference;
  NormScheme normalization = NormScheme::MinMax110;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  bool has_val = false;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochStats> log;
};

// Builds the AP graph per config, from the training set only (co-detection
// requires training role; inverse distance requires AP positions).
ApGraph build_graph(const FingerprintDataset& train_raw,
                    const TrainingConfig& config);

// Mini-batch Adam on the mean cross-entropy. Deterministic given the seed:
// fixed shuffle order, fixed batched gradient reduction. Throws
// NumericError naming the epoch if the loss goes non-finite. val_raw is
// optional; per-epoch validation accuracy is logged when its samples carry
// rp labels.
TrainResult train(const FingerprintDataset& train_raw,
                  const FingerprintDataset* val_raw,
                  const TrainingConfig& config);

// --- evaluation ---------------------------------------------------------------

struct BoxplotStats {
  double min = 0.0;
  double p25 = 0.0;
  double median = 0.0;
  double p75 = 0.0;
  double max = 0.0;
  std::vector<double> outliers;  // beyond 1.5 IQR Tukey fences
};

struct EvalReport {
  std::string mode;  // "2d" | "3d"
  std::string label;
  std::size_t sample_count = 0;
  // 2d: every test sample; 3d: only samples with building and floor both
  // predicted correctly.
  std::vector<double> errors_m;
  double mean_error_m = 0.0;
  double p60_error_m = 0.0;
  std::vector<std::pair<double, double>> cdf;  // (sorted error, quantile)
  BoxplotStats box;
  bool has_floor_building = false;
  double floor_accuracy = 0.0;
  double building_accuracy = 0.0;
  std::size_t joint_correct_count = 0;
  bool no_conditioned_samples = false;
};

// Planar Euclidean error between decoded and true coordinates over the full
// test set.
EvalReport evaluate_2d(const TrainedModel& model,
                       const FingerprintDataset& test_raw);

// Adds building/floor accuracy over all samples; distance statistics are
// computed only over the jointly-correct subset.
EvalReport evaluate_3d(const TrainedModel& model,
                       const FingerprintDataset& test_raw);

// Linear-interpolation quantile of an ascending-sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);

std::string report_to_json_string(const EvalReport& report);

// Aligned metric table (CSV text) for a set of runs.
std::string comparison_table_csv(std::span<const EvalReport> reports);

// Writes comparison.csv plus cdf_<label>.csv and box_<label>.csv per
// report into dir (created if absent). Returns the written paths.
std::vector<std::string> write_comparison_files(
    const std::string& dir, std::span<const EvalReport> reports);

}  // namespace fploc
