#include "fploc/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "fploc/activations.hpp"
#include "fploc/adam.hpp"
#include "fploc/exceptions.hpp"
#include "fploc/rng.hpp"

namespace fploc {

namespace {

using nlohmann::json;

std::vector<std::size_t> labels_of(const FingerprintDataset& ds) {
  std::vector<std::size_t> labels;
  labels.reserve(ds.samples.size());
  const std::size_t k = ds.n_classes();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const int rp = ds.samples[i].rp_index;
    if (rp < 0 || static_cast<std::size_t>(rp) >= k) {
      throw ValidationError("train: sample " + std::to_string(i) +
                            " has rp label " + std::to_string(rp) +
                            " outside [0, " + std::to_string(k) + ")");
    }
    labels.push_back(static_cast<std::size_t>(rp));
  }
  return labels;
}

// classification accuracy of a labeled dataset under the current params,
// evaluated in chunks
template <typename ForwardProbs>
double dataset_accuracy(const FingerprintDataset& normalized,
                        const std::vector<std::size_t>& labels,
                        ForwardProbs&& forward_probs) {
  constexpr std::size_t kChunk = 256;
  std::size_t correct = 0;
  std::vector<Matrix> xs;
  std::vector<std::size_t> ts;
  for (std::size_t at = 0; at < normalized.samples.size(); at += kChunk) {
    const std::size_t end =
        std::min(normalized.samples.size(), at + kChunk);
    xs.clear();
    ts.clear();
    for (std::size_t i = at; i < end; ++i) {
      xs.push_back(normalized.samples[i].rssi);
      ts.push_back(labels[i]);
    }
    const Matrix probs = forward_probs(std::span<const Matrix>(xs));
    correct += count_correct(probs, ts);
  }
  return static_cast<double>(correct) /
         static_cast<double>(normalized.samples.size());
}

}  // namespace

ApGraph build_graph(const FingerprintDataset& train_raw,
                    const TrainingConfig& config) {
  if (config.adjacency == AdjacencyMethod::CoDetectionProbability) {
    return build_propagation(
        adjacency_from_codetection(train_raw, config.detect_threshold_dbm),
        AdjacencyMethod::CoDetectionProbability);
  }
  if (train_raw.ap_positions.size() != train_raw.n_ap) {
    throw ConfigError(
        "adjacency method 'distance' requires AP positions in the training "
        "dataset (present for synthetic scenarios only)");
  }
  return build_propagation(adjacency_from_distance(train_raw.ap_positions),
                           AdjacencyMethod::InverseDistance);
}

TrainResult train(const FingerprintDataset& train_raw,
                  const FingerprintDataset* val_raw,
                  const TrainingConfig& config) {
  if (config.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (config.batch_size < 1) {
    throw ConfigError("train: batch_size must be >= 1");
  }
  if (!(config.learning_rate > 0.0)) {
    throw ConfigError("train: learning_rate must be positive");
  }
  if (train_raw.role != DatasetRole::Train) {
    throw ValidationError("train: dataset role must be train");
  }
  if (train_raw.samples.empty()) {
    throw ValidationError("train: empty training set");
  }
  const std::size_t k = train_raw.n_classes();
  if (k == 0) {
    throw ValidationError(
        "train: dataset has no RP table; run derive_rp_classes first");
  }
  const std::vector<std::size_t> labels = labels_of(train_raw);

  const bool is_gcn = config.model == ModelKind::Gcn;
  ApGraph graph;
  if (is_gcn) graph = build_graph(train_raw, config);

  const FingerprintDataset train_norm =
      normalize_features(train_raw, config.normalization);
  FingerprintDataset val_norm;
  std::vector<std::size_t> val_labels;
  bool have_val = false;
  if (val_raw != nullptr && !val_raw->samples.empty()) {
    // validation accuracy is only defined when val samples carry RP labels
    have_val = std::all_of(val_raw->samples.begin(), val_raw->samples.end(),
                           [&](const FingerprintSample& s) {
                             return s.rp_index >= 0 &&
                                    static_cast<std::size_t>(s.rp_index) < k;
                           });
    if (have_val) {
      val_norm = normalize_features(*val_raw, config.normalization);
      for (const auto& s : val_norm.samples) {
        val_labels.push_back(static_cast<std::size_t>(s.rp_index));
      }
    }
  }

  Rng rng(config.seed);
  const AdamConfig adam_cfg{config.adam_beta1, config.adam_beta2,
                            config.adam_epsilon, config.learning_rate};

  GcnParams gcn_params;
  DnnParams dnn_params;
  std::vector<Matrix*> param_list;
  if (is_gcn) {
    gcn_params = init_gcn_params(
        GcnConfig{train_raw.n_ap, train_raw.n_s, k, config.mlp_input}, rng);
    param_list = {&gcn_params.theta0, &gcn_params.theta1};
    for (std::size_t l = 0; l < gcn_params.mlp.weights.size(); ++l) {
      param_list.push_back(&gcn_params.mlp.weights[l]);
      param_list.push_back(&gcn_params.mlp.biases[l]);
    }
  } else {
    dnn_params = init_dnn_params(train_raw.n_ap * train_raw.n_s, k, rng);
    for (std::size_t l = 0; l < dnn_params.fc.weights.size(); ++l) {
      param_list.push_back(&dnn_params.fc.weights[l]);
      param_list.push_back(&dnn_params.fc.biases[l]);
    }
  }
  std::vector<AdamState> adam;
  adam.reserve(param_list.size());
  for (const Matrix* p : param_list) {
    adam.emplace_back(p->rows(), p->cols(), adam_cfg);
  }

  const std::size_t m = train_raw.samples.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.log.reserve(config.epochs);
  std::vector<Matrix> batch_x;
  std::vector<std::size_t> batch_t;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t at = 0; at < m;
         at += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(m, at + static_cast<std::size_t>(config.batch_size));
      batch_x.clear();
      batch_t.clear();
      for (std::size_t i = at; i < end; ++i) {
        batch_x.push_back(train_norm.samples[order[i]].rssi);
        batch_t.push_back(labels[order[i]]);
      }
      double batch_loss = 0.0;
      std::vector<Matrix> grad_list;
      if (is_gcn) {
        const ForwardTrace trace = forward(std::span<const Matrix>(batch_x),
                                           graph, gcn_params,
                                           config.mlp_input);
        batch_loss = mean_cross_entropy(trace.probs(), batch_t);
        correct += count_correct(trace.probs(), batch_t);
        GcnGrads grads = backward(trace, batch_t, graph, gcn_params);
        grad_list.push_back(std::move(grads.theta0));
        grad_list.push_back(std::move(grads.theta1));
        for (std::size_t l = 0; l < grads.mlp.weights.size(); ++l) {
          grad_list.push_back(std::move(grads.mlp.weights[l]));
          grad_list.push_back(std::move(grads.mlp.biases[l]));
        }
      } else {
        const FcTrace trace = dnn_forward(batch_x, dnn_params);
        batch_loss = mean_cross_entropy(trace.act.back(), batch_t);
        correct += count_correct(trace.act.back(), batch_t);
        FcGrads grads = dnn_backward(dnn_params, trace, batch_t);
        for (std::size_t l = 0; l < grads.weights.size(); ++l) {
          grad_list.push_back(std::move(grads.weights[l]));
          grad_list.push_back(std::move(grads.biases[l]));
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training diverged at epoch " +
                           std::to_string(epoch) + " (non-finite loss)");
      }
      loss_sum += batch_loss * static_cast<double>(end - at);
      for (std::size_t p = 0; p < param_list.size(); ++p) {
        adam[p].step(*param_list[p], grad_list[p]);
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(m);
    stats.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(m);
    if (have_val) {
      stats.has_val = true;
      stats.val_accuracy = dataset_accuracy(
          val_norm, val_labels, [&](std::span<const Matrix> xs) {
            return is_gcn
                       ? forward(xs, graph, gcn_params, config.mlp_input)
                             .probs()
                       : dnn_forward(xs, dnn_params).act.back();
          });
    }
    result.log.push_back(stats);
  }

  TrainedModel& model = result.model;
  model.kind = config.model;
  model.n_ap = train_raw.n_ap;
  model.n_s = train_raw.n_s;
  model.n_classes = k;
  model.normalization = config.normalization;
  model.mlp_input = config.mlp_input;
  model.rp_table = train_raw.rp_table;
  if (is_gcn) {
    model.adjacency_method = graph.method;
    model.adjacency_hash = adjacency_content_hash(graph.adjacency);
    model.gcn = std::move(gcn_params);
    model.graph = std::move(graph);
  } else {
    model.adjacency_hash = 0;
    model.dnn = std::move(dnn_params);
  }
  return result;
}

// --- evaluation -----------------------------------------------------------------

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted[0];
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

namespace {

void fill_error_stats(EvalReport& report, std::vector<double> errors) {
  report.errors_m = errors;
  report.sample_count = errors.size();
  if (errors.empty()) return;
  report.mean_error_m =
      std::accumulate(errors.begin(), errors.end(), 0.0) /
      static_cast<double>(errors.size());
  std::vector<double> sorted = std::move(errors);
  std::sort(sorted.begin(), sorted.end());
  report.cdf.clear();
  report.cdf.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    report.cdf.emplace_back(
        sorted[i],
        static_cast<double>(i + 1) / static_cast<double>(sorted.size()));
  }
  report.p60_error_m = quantile_sorted(sorted, 0.60);
  report.box.min = sorted.front();
  report.box.max = sorted.back();
  report.box.p25 = quantile_sorted(sorted, 0.25);
  report.box.median = quantile_sorted(sorted, 0.50);
  report.box.p75 = quantile_sorted(sorted, 0.75);
  const double iqr = report.box.p75 - report.box.p25;
  const double lo_fence = report.box.p25 - 1.5 * iqr;
  const double hi_fence = report.box.p75 + 1.5 * iqr;
  report.box.outliers.clear();
  for (double e : sorted) {
    if (e < lo_fence || e > hi_fence) report.box.outliers.push_back(e);
  }
}

struct DecodedSet {
  std::vector<Location> locations;
};

DecodedSet decode_dataset(const TrainedModel& model,
                          const FingerprintDataset& test_raw) {
  if (test_raw.samples.empty()) {
    throw ValidationError("evaluate: empty test set");
  }
  if (test_raw.n_ap != model.n_ap || test_raw.n_s != model.n_s) {
    throw ConfigError(
        "evaluate: model/test mismatch: n_ap " + std::to_string(model.n_ap) +
        " vs " + std::to_string(test_raw.n_ap) + ", n_s " +
        std::to_string(model.n_s) + " vs " + std::to_string(test_raw.n_s));
  }
  DecodedSet out;
  out.locations.reserve(test_raw.samples.size());
  constexpr std::size_t kChunk = 256;
  std::vector<Matrix> xs;
  for (std::size_t at = 0; at < test_raw.samples.size(); at += kChunk) {
    const std::size_t end =
        std::min(test_raw.samples.size(), at + kChunk);
    xs.clear();
    for (std::size_t i = at; i < end; ++i) {
      xs.push_back(test_raw.samples[i].rssi);
    }
    const Matrix probs = predict_probs(model, xs);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      out.locations.push_back(
          decode_location(probs.row_span(r), model.rp_table));
    }
  }
  return out;
}

}  // namespace

EvalReport evaluate_2d(const TrainedModel& model,
                       const FingerprintDataset& test_raw) {
  const DecodedSet decoded = decode_dataset(model, test_raw);
  std::vector<double> errors;
  errors.reserve(test_raw.samples.size());
  for (std::size_t i = 0; i < test_raw.samples.size(); ++i) {
    const auto& s = test_raw.samples[i];
    errors.push_back(std::hypot(decoded.locations[i].x - s.longitude,
                                decoded.locations[i].y - s.latitude));
  }
  EvalReport report;
  report.mode = "2d";
  report.label = model_kind_name(model.kind);
  fill_error_stats(report, std::move(errors));
  return report;
}

EvalReport evaluate_3d(const TrainedModel& model,
                       const FingerprintDataset& test_raw) {
  const DecodedSet decoded = decode_dataset(model, test_raw);
  std::size_t floor_ok = 0;
  std::size_t building_ok = 0;
  std::vector<double> conditioned;
  for (std::size_t i = 0; i < test_raw.samples.size(); ++i) {
    const auto& s = test_raw.samples[i];
    const auto& loc = decoded.locations[i];
    const bool f = loc.floor == s.floor;
    const bool b = loc.building == s.building;
    floor_ok += f;
    building_ok += b;
    if (f && b) {
      conditioned.push_back(
          std::hypot(loc.x - s.longitude, loc.y - s.latitude));
    }
  }
  EvalReport report;
  report.mode = "3d";
  report.label = model_kind_name(model.kind);
  report.has_floor_building = true;
  const double total = static_cast<double>(test_raw.samples.size());
  report.floor_accuracy = static_cast<double>(floor_ok) / total;
  report.building_accuracy = static_cast<double>(building_ok) / total;
  report.joint_correct_count = conditioned.size();
  report.no_conditioned_samples = conditioned.empty();
  fill_error_stats(report, std::move(conditioned));
  return report;
}

std::string report_to_json_string(const EvalReport& report) {
  json j;
  j["mode"] = report.mode;
  j["label"] = report.label;
  j["sample_count"] = report.sample_count;
  if (report.has_floor_building) {
    j["floor_accuracy"] = report.floor_accuracy;
    j["building_accuracy"] = report.building_accuracy;
    j["joint_correct_count"] = report.joint_correct_count;
    j["no_conditioned_samples"] = report.no_conditioned_samples;
  }
  if (!report.no_conditioned_samples || !report.has_floor_building) {
    j["mean_error_m"] = report.mean_error_m;
    j["p60_error_m"] = report.p60_error_m;
    j["percentiles"] = {{"min", report.box.min},
                        {"p25", report.box.p25},
                        {"median", report.box.median},
                        {"p75", report.box.p75},
                        {"max", report.box.max}};
    j["outliers"] = report.box.outliers;
    json cdf = json::array();
    for (const auto& [e, q] : report.cdf) cdf.push_back({e, q});
    j["cdf"] = std::move(cdf);
    j["errors_m"] = report.errors_m;
  }
  return j.dump(2);
}

namespace {

std::string sanitize_label(const std::string& label) {
  std::string out;
  for (char c : label) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
            c == '_')
               ? c
               : '_';
  }
  return out.empty() ? std::string("run") : out;
}

}  // namespace

std::string comparison_table_csv(std::span<const EvalReport> reports) {
  std::string csv =
      "label,mode,samples,mean_error_m,p60_error_m,median_error_m,"
      "p25_error_m,p75_error_m,min_error_m,max_error_m,floor_accuracy,"
      "building_accuracy\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    csv += r.label + "," + r.mode + "," + std::to_string(r.sample_count) +
           "," + num(r.mean_error_m) + "," + num(r.p60_error_m) + "," +
           num(r.box.median) + "," + num(r.box.p25) + "," + num(r.box.p75) +
           "," + num(r.box.min) + "," + num(r.box.max) + ",";
    csv += r.has_floor_building ? num(r.floor_accuracy) : "";
    csv += ",";
    csv += r.has_floor_building ? num(r.building_accuracy) : "";
    csv += "\n";
  }
  return csv;
}

std::vector<std::string> write_comparison_files(
    const std::string& dir, std::span<const EvalReport> reports) {
  if (reports.empty()) {
    throw ValidationError("write_comparison_files: no reports");
  }
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;

  const fs::path table_path = fs::path(dir) / "comparison.csv";
  {
    std::ofstream out(table_path);
    if (!out) throw IoError("cannot write file: " + table_path.string());
    out << comparison_table_csv(reports);
  }
  written.push_back(table_path.string());

  char buf[64];
  for (const auto& r : reports) {
    const std::string label = sanitize_label(r.label);
    const fs::path cdf_path = fs::path(dir) / ("cdf_" + label + ".csv");
    {
      std::ofstream out(cdf_path);
      if (!out) throw IoError("cannot write file: " + cdf_path.string());
      out << "error_m,quantile\n";
      for (const auto& [e, q] : r.cdf) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", e, q);
        out << buf;
      }
    }
    written.push_back(cdf_path.string());

    const fs::path box_path = fs::path(dir) / ("box_" + label + ".csv");
    {
      std::ofstream out(box_path);
      if (!out) throw IoError("cannot write file: " + box_path.string());
      out << "stat,value\n";
      auto line = [&](const char* stat, double v) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g\n", stat, v);
        out << buf;
      };
      line("min", r.box.min);
      line("p25", r.box.p25);
      line("median", r.box.median);
      line("p75", r.box.p75);
      line("max", r.box.max);
      for (double o : r.box.outliers) line("outlier", o);
    }
    written.push_back(box_path.string());
  }
  return written;
}

}  // namespace fploc
