// fploc command-line tool: ingest / synth / train / eval / predict.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fploc/config_json.hpp"
#include "fploc/data.hpp"
#include "fploc/exceptions.hpp"
#include "fploc/graph.hpp"
#include "fploc/hash.hpp"
#include "fploc/kernels.hpp"
#include "fploc/model_io.hpp"
#include "fploc/train_eval.hpp"
#include "fploc/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInternalError = 1;
constexpr int kExitUserError = 2;

std::uint64_t apply_seed_override(std::uint64_t seed) {
  const char* env = std::getenv("FPLOC_SEED");
  if (env == nullptr || env[0] == '\0') return seed;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), v);
  if (ec != std::errc() || *ptr != '\0') {
    throw fploc::ConfigError(std::string("FPLOC_SEED='") + env +
                             "' is not a valid unsigned integer");
  }
  return v;
}

json manifest_base(const std::string& command) {
  json m;
  m["command"] = command;
  m["tool_version"] = std::string(fploc::kToolVersion);
  m["kernel_backend"] = fploc::kern::backend_name(fploc::kern::active_backend());
  return m;
}

void write_text_file(const std::string& path, const std::string& text) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fploc::IoError("cannot write file: " + path);
  out << text;
  if (!out) throw fploc::IoError("write failed: " + path);
}

void write_manifest(const std::string& path, const json& manifest) {
  write_text_file(path, manifest.dump(2) + "\n");
}

fploc::DatasetRole role_from_name(const std::string& name) {
  if (name == "train") return fploc::DatasetRole::Train;
  if (name == "test") return fploc::DatasetRole::Test;
  throw fploc::ConfigError("unknown role '" + name +
                           "' (expected 'train' or 'test')");
}

// --- subcommands ------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string role = "train";
  std::string out;
  std::string grouping = "exact";
  int building = -1;
  int floor = -1;
};

void cmd_ingest(const IngestArgs& args) {
  const fploc::DatasetRole role = role_from_name(args.role);
  fploc::RpGrouping grouping;
  if (args.grouping == "exact") {
    grouping = fploc::RpGrouping::ExactTuple;
  } else if (args.grouping == "space") {
    grouping = fploc::RpGrouping::SpaceId;
  } else {
    throw fploc::ConfigError("unknown rp grouping '" + args.grouping +
                             "' (expected 'exact' or 'space')");
  }

  fploc::FingerprintDataset ds = fploc::load_ujiindoorloc(args.input, role);
  if (args.building >= 0 || args.floor >= 0) {
    fploc::filter_building_floor(ds, args.building, args.floor);
    if (ds.samples.empty()) {
      throw fploc::ValidationError(
          "ingest: building/floor filter removed every sample");
    }
  }
  if (role == fploc::DatasetRole::Train) {
    fploc::derive_rp_classes(ds, grouping);
  }
  fploc::save_dataset(args.out, ds);

  json manifest = manifest_base("ingest");
  manifest["config"] = {{"role", args.role},
                        {"rp_grouping", args.grouping},
                        {"building", args.building},
                        {"floor", args.floor}};
  manifest["inputs"] = {{"csv", {{"path", args.input}, {"hash", ds.source_hash}}}};
  manifest["outputs"] = {args.out};
  write_manifest(args.out + ".manifest.json", manifest);

  std::cout << ds.samples.size() << " samples, " << ds.n_ap << " APs";
  if (role == fploc::DatasetRole::Train) {
    std::cout << ", K=" << ds.n_classes();
  }
  std::cout << ", hash=" << ds.source_hash << "\n";
}

struct SynthArgs {
  std::string scenario;
  std::string out_dir;
};

void cmd_synth(const SynthArgs& args) {
  fploc::SyntheticScenario sc;
  std::string scenario_hash;
  if (!args.scenario.empty()) {
    sc = fploc::scenario_from_json_file(args.scenario);
    scenario_hash = fploc::hash_file(args.scenario);
  }
  sc.seed = apply_seed_override(sc.seed);

  const auto [train, test] = fploc::generate_synthetic(sc);
  fs::create_directories(args.out_dir);
  const std::string train_path = (fs::path(args.out_dir) / "train.fpds").string();
  const std::string test_path = (fs::path(args.out_dir) / "test.fpds").string();
  fploc::save_dataset(train_path, train);
  fploc::save_dataset(test_path, test);

  json manifest = manifest_base("synth");
  manifest["seed"] = sc.seed;
  manifest["config"] = json::parse(fploc::scenario_to_json_string(sc));
  if (!args.scenario.empty()) {
    manifest["inputs"] = {
        {"scenario", {{"path", args.scenario}, {"hash", scenario_hash}}}};
  }
  manifest["outputs"] = {train_path, test_path};
  write_manifest((fs::path(args.out_dir) / "manifest.json").string(), manifest);

  std::cout << "synthetic scenario: " << train.samples.size()
            << " train + " << test.samples.size() << " test samples, "
            << train.n_ap << " APs, K=" << train.n_classes() << "\n";
}

struct TrainArgs {
  std::string train_path;
  std::string val_path;
  std::string config_path;
  std::string out;
  std::string dump_adjacency;
};

void cmd_train(const TrainArgs& args) {
  fploc::TrainingConfig cfg;
  std::string config_hash;
  if (!args.config_path.empty()) {
    cfg = fploc::training_config_from_json_file(args.config_path);
    config_hash = fploc::hash_file(args.config_path);
  }
  cfg.seed = apply_seed_override(cfg.seed);

  const fploc::FingerprintDataset train_ds =
      fploc::load_dataset(args.train_path);
  if (train_ds.role != fploc::DatasetRole::Train) {
    throw fploc::ValidationError("train: dataset role must be train: " +
                                 args.train_path);
  }
  fploc::FingerprintDataset val_ds;
  const fploc::FingerprintDataset* val_ptr = nullptr;
  if (!args.val_path.empty()) {
    val_ds = fploc::load_dataset(args.val_path);
    val_ptr = &val_ds;
  }

  const fploc::TrainResult result = fploc::train(train_ds, val_ptr, cfg);
  fploc::save_model(args.out, result.model);

  if (!args.dump_adjacency.empty()) {
    if (result.model.kind != fploc::ModelKind::Gcn) {
      throw fploc::ConfigError(
          "--dump-adjacency: the dnn baseline has no adjacency");
    }
    fploc::write_adjacency_csv(args.dump_adjacency,
                               result.model.graph.adjacency);
  }

  const std::string loss_path = args.out + ".loss.csv";
  {
    std::string csv = "epoch,mean_loss,train_accuracy,val_accuracy\n";
    char buf[96];
    for (const auto& e : result.log) {
      if (e.has_val) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g\n", e.epoch,
                      e.mean_loss, e.train_accuracy, e.val_accuracy);
      } else {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,\n", e.epoch,
                      e.mean_loss, e.train_accuracy);
      }
      csv += buf;
    }
    write_text_file(loss_path, csv);
  }

  json manifest = manifest_base("train");
  manifest["seed"] = cfg.seed;
  manifest["config"] = json::parse(fploc::training_config_to_json_string(cfg));
  json inputs;
  inputs["train"] = {{"path", args.train_path},
                     {"hash", fploc::hash_file(args.train_path)}};
  if (!args.val_path.empty()) {
    inputs["val"] = {{"path", args.val_path},
                     {"hash", fploc::hash_file(args.val_path)}};
  }
  if (!args.config_path.empty()) {
    inputs["config"] = {{"path", args.config_path}, {"hash", config_hash}};
  }
  manifest["inputs"] = std::move(inputs);
  json outputs = {args.out, loss_path};
  if (!args.dump_adjacency.empty()) outputs.push_back(args.dump_adjacency);
  manifest["outputs"] = std::move(outputs);
  json loss_log = json::array();
  for (const auto& e : result.log) {
    json row = {{"epoch", e.epoch},
                {"mean_loss", e.mean_loss},
                {"train_accuracy", e.train_accuracy}};
    if (e.has_val) row["val_accuracy"] = e.val_accuracy;
    loss_log.push_back(std::move(row));
  }
  manifest["loss_log"] = std::move(loss_log);
  write_manifest(args.out + ".manifest.json", manifest);

  const auto& last = result.log.back();
  std::cout << "trained " << fploc::model_kind_name(result.model.kind)
            << " for " << result.log.size() << " epochs: final loss "
            << last.mean_loss << ", train accuracy " << last.train_accuracy;
  if (last.has_val) std::cout << ", val accuracy " << last.val_accuracy;
  std::cout << "\n";
}

struct EvalArgs {
  std::string model_path;
  std::string test_path;
  std::string mode = "2d";
  std::string out_dir;
  std::string label;
};

void cmd_eval(const EvalArgs& args) {
  if (args.mode != "2d" && args.mode != "3d") {
    throw fploc::ConfigError("unknown mode '" + args.mode +
                             "' (expected '2d' or '3d')");
  }
  const fploc::TrainedModel model = fploc::load_model(args.model_path);
  const fploc::FingerprintDataset test_ds = fploc::load_dataset(args.test_path);

  fploc::EvalReport report = args.mode == "2d"
                                 ? fploc::evaluate_2d(model, test_ds)
                                 : fploc::evaluate_3d(model, test_ds);
  if (!args.label.empty()) report.label = args.label;

  fs::create_directories(args.out_dir);
  const std::string report_path =
      (fs::path(args.out_dir) / "report.json").string();
  write_text_file(report_path, fploc::report_to_json_string(report) + "\n");
  const fploc::EvalReport reports[] = {report};
  std::vector<std::string> written =
      fploc::write_comparison_files(args.out_dir, reports);
  written.insert(written.begin(), report_path);

  json manifest = manifest_base("eval");
  manifest["config"] = {{"mode", args.mode}, {"label", report.label}};
  manifest["inputs"] = {
      {"model",
       {{"path", args.model_path}, {"hash", fploc::hash_file(args.model_path)}}},
      {"test",
       {{"path", args.test_path}, {"hash", fploc::hash_file(args.test_path)}}}};
  manifest["outputs"] = written;
  write_manifest((fs::path(args.out_dir) / "manifest.json").string(), manifest);

  if (report.has_floor_building) {
    std::cout << "building accuracy " << report.building_accuracy
              << ", floor accuracy " << report.floor_accuracy << ", "
              << report.joint_correct_count << "/" << test_ds.samples.size()
              << " conditioned samples";
    if (report.no_conditioned_samples) {
      std::cout << " (no conditioned samples; distance stats omitted)\n";
    } else {
      std::cout << ", mean distance error " << report.mean_error_m << " m\n";
    }
  } else {
    std::cout << "mean distance error " << report.mean_error_m
              << " m over " << report.sample_count << " samples\n";
  }
}

struct PredictArgs {
  std::string model_path;
  std::string rssi_path;
  std::size_t top_k = 5;
  std::string manifest_path;
};

void cmd_predict(const PredictArgs& args) {
  const fploc::TrainedModel model = fploc::load_model(args.model_path);
  std::ifstream in(args.rssi_path);
  if (!in) throw fploc::IoError("cannot open file: " + args.rssi_path);

  const std::size_t expected = model.n_ap * model.n_s;
  std::vector<fploc::Matrix> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> values;
    values.reserve(expected);
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      double v = 0.0;
      const auto [ptr, ec] =
          std::from_chars(line.data() + start, line.data() + end, v);
      if (ec != std::errc() || ptr != line.data() + end) {
        throw fploc::ParseError("rssi row " + std::to_string(line_no) +
                                ": bad value '" +
                                line.substr(start, end - start) + "'");
      }
      values.push_back(v);
      if (end == line.size()) break;
      start = end + 1;
    }
    if (values.size() != expected) {
      throw fploc::ParseError("rssi row " + std::to_string(line_no) +
                              ": expected " + std::to_string(expected) +
                              " values, got " + std::to_string(values.size()));
    }
    rows.emplace_back(model.n_ap, model.n_s, std::move(values));
  }
  if (rows.empty()) {
    throw fploc::ParseError("rssi file has no rows: " + args.rssi_path);
  }

  const fploc::Matrix probs = fploc::predict_probs(model, rows);
  // flag rows where the top class holds less than half the probability mass
  const double low_confidence_threshold = 0.5;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto row = probs.row_span(r);
    const fploc::Location loc = fploc::decode_location(row, model.rp_table);
    std::vector<std::size_t> idx(row.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t k = std::min(args.top_k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (row[a] != row[b]) return row[a] > row[b];
                        return a < b;
                      });
    json out;
    out["x"] = loc.x;
    out["y"] = loc.y;
    out["floor"] = loc.floor;
    out["building"] = loc.building;
    json top = json::array();
    for (std::size_t i = 0; i < k; ++i) {
      top.push_back({{"rp", idx[i]}, {"prob", row[idx[i]]}});
    }
    out["top_k"] = std::move(top);
    out["low_confidence"] = row[idx[0]] < low_confidence_threshold;
    std::cout << out.dump() << "\n";
  }

  if (!args.manifest_path.empty()) {
    json manifest = manifest_base("predict");
    manifest["config"] = {{"top_k", args.top_k}};
    manifest["inputs"] = {
        {"model",
         {{"path", args.model_path}, {"hash", fploc::hash_file(args.model_path)}}},
        {"rssi",
         {{"path", args.rssi_path}, {"hash", fploc::hash_file(args.rssi_path)}}}};
    manifest["outputs"] = json::array();
    write_manifest(args.manifest_path, manifest);
  }
}

int report_error(bool json_errors, const std::string& kind,
                 const std::string& message) {
  if (json_errors) {
    json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "fploc: error: " << message << "\n";
  }
  const bool user_error = kind == "config" || kind == "parse" ||
                          kind == "validation" || kind == "io";
  return user_error ? kExitUserError : kExitInternalError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GCN-based WiFi RSSI fingerprint indoor localization"};
  app.set_version_flag("--version", std::string(fploc::kToolVersion));
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors,
               "emit machine-readable error JSON on stderr");
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* cmd_in = app.add_subcommand("ingest", "ingest a UJIIndoorLoc-format CSV");
  cmd_in->add_option("--input", ingest.input, "input CSV")->required();
  cmd_in->add_option("--role", ingest.role, "train|test");
  cmd_in->add_option("--out", ingest.out, "output dataset file")->required();
  cmd_in->add_option("--rp-grouping", ingest.grouping,
                     "RP class grouping: exact|space");
  cmd_in->add_option("--building", ingest.building, "keep only this building");
  cmd_in->add_option("--floor", ingest.floor, "keep only this floor");

  SynthArgs synth;
  auto* cmd_sy = app.add_subcommand("synth", "generate a synthetic scenario");
  cmd_sy->add_option("--scenario", synth.scenario,
                     "scenario JSON (defaults used when omitted)");
  cmd_sy->add_option("--out-dir", synth.out_dir, "output directory")->required();

  TrainArgs train;
  auto* cmd_tr = app.add_subcommand("train", "train a localization model");
  cmd_tr->add_option("--train", train.train_path, "training dataset")->required();
  cmd_tr->add_option("--val", train.val_path, "validation dataset (optional)");
  cmd_tr->add_option("--config", train.config_path,
                     "training config JSON (defaults used when omitted)");
  cmd_tr->add_option("--out", train.out, "output model artifact")->required();
  cmd_tr->add_option("--dump-adjacency", train.dump_adjacency,
                     "also write the adjacency matrix as headerless CSV");

  EvalArgs eval;
  auto* cmd_ev = app.add_subcommand("eval", "evaluate a model on a test set");
  cmd_ev->add_option("--model", eval.model_path, "model artifact")->required();
  cmd_ev->add_option("--test", eval.test_path, "test dataset")->required();
  cmd_ev->add_option("--mode", eval.mode, "2d|3d");
  cmd_ev->add_option("--out-dir", eval.out_dir, "output directory")->required();
  cmd_ev->add_option("--label", eval.label, "label for plot data files");

  PredictArgs predict;
  auto* cmd_pr = app.add_subcommand("predict", "predict locations for RSSI rows");
  cmd_pr->add_option("--model", predict.model_path, "model artifact")->required();
  cmd_pr->add_option("--rssi", predict.rssi_path,
                     "headerless CSV, one fingerprint per row")->required();
  cmd_pr->add_option("--top-k", predict.top_k, "top classes to report");
  cmd_pr->add_option("--manifest", predict.manifest_path,
                     "write a run manifest to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return kExitUserError;
  }

  try {
    if (cmd_in->parsed()) cmd_ingest(ingest);
    if (cmd_sy->parsed()) cmd_synth(synth);
    if (cmd_tr->parsed()) cmd_train(train);
    if (cmd_ev->parsed()) cmd_eval(eval);
    if (cmd_pr->parsed()) cmd_predict(predict);
  } catch (const fploc::Error& e) {
    return report_error(json_errors, e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error(json_errors, "internal", e.what());
  }
  return 0;
}
