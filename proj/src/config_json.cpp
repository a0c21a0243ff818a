#include "fploc/config_json.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fploc/exceptions.hpp"

namespace fploc {

namespace {

using nlohmann::json;

json parse_object(const std::string& text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) {
    throw ConfigError(std::string(what) + ": top level must be a JSON object");
  }
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

// Typed getters that name the offending key.
class StrictObject {
 public:
  explicit StrictObject(const json& j) : j_(j) {}

  double number(const char* key, double fallback) {
    mark(key);
    if (!j_.contains(key)) return fallback;
    if (!j_[key].is_number()) bad(key, "a number");
    return j_[key].get<double>();
  }

  std::int64_t integer(const char* key, std::int64_t fallback) {
    mark(key);
    if (!j_.contains(key)) return fallback;
    if (!j_[key].is_number_integer()) bad(key, "an integer");
    return j_[key].get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) {
    mark(key);
    if (!j_.contains(key)) return fallback;
    if (!j_[key].is_number_integer() || j_[key].is_number_float() ||
        (j_[key].is_number_integer() && j_[key].get<std::int64_t>() < 0 &&
         !j_[key].is_number_unsigned())) {
      bad(key, "a nonnegative integer");
    }
    return j_[key].get<std::uint64_t>();
  }

  std::string text(const char* key, const std::string& fallback) {
    mark(key);
    if (!j_.contains(key)) return fallback;
    if (!j_[key].is_string()) bad(key, "a string");
    return j_[key].get<std::string>();
  }

  // Call after all keys were consumed.
  void reject_unknown(const char* what) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.count(it.key())) {
        throw ConfigError(std::string(what) + ": unknown config key '" +
                          it.key() + "'");
      }
    }
  }

 private:
  void mark(const char* key) { known_.insert(key); }
  [[noreturn]] void bad(const char* key, const char* expected) {
    throw ConfigError(std::string("config key '") + key + "': expected " +
                      expected);
  }
  const json& j_;
  std::set<std::string> known_;
};

}  // namespace

TrainingConfig training_config_from_json_string(const std::string& text) {
  const json j = parse_object(text, "training config");
  StrictObject obj(j);
  TrainingConfig cfg;
  cfg.epochs = static_cast<int>(obj.integer("epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(obj.integer("batch_size", cfg.batch_size));
  cfg.learning_rate = obj.number("learning_rate", cfg.learning_rate);
  cfg.seed = obj.unsigned_integer("seed", cfg.seed);
  cfg.model = model_kind_from_name(
      obj.text("model", model_kind_name(cfg.model)));
  cfg.adjacency = adjacency_method_from_name(
      obj.text("adjacency", adjacency_method_name(cfg.adjacency)));
  cfg.detect_threshold_dbm =
      obj.number("detect_threshold_dbm", cfg.detect_threshold_dbm);
  cfg.mlp_input =
      mlp_input_from_name(obj.text("mlp_input", mlp_input_name(cfg.mlp_input)));
  cfg.normalization = norm_scheme_from_name(
      obj.text("normalization", norm_scheme_name(cfg.normalization)));
  cfg.adam_beta1 = obj.number("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = obj.number("adam_beta2", cfg.adam_beta2);
  cfg.adam_epsilon = obj.number("adam_epsilon", cfg.adam_epsilon);
  obj.reject_unknown("training config");

  if (cfg.epochs < 1) throw ConfigError("config key 'epochs': must be >= 1");
  if (cfg.batch_size < 1) {
    throw ConfigError("config key 'batch_size': must be >= 1");
  }
  if (!(cfg.learning_rate > 0.0)) {
    throw ConfigError("config key 'learning_rate': must be positive");
  }
  return cfg;
}

TrainingConfig training_config_from_json_file(const std::string& path) {
  return training_config_from_json_string(read_file(path));
}

std::string training_config_to_json_string(const TrainingConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["seed"] = cfg.seed;
  j["model"] = model_kind_name(cfg.model);
  j["adjacency"] = adjacency_method_name(cfg.adjacency);
  j["detect_threshold_dbm"] = cfg.detect_threshold_dbm;
  j["mlp_input"] = mlp_input_name(cfg.mlp_input);
  j["normalization"] = norm_scheme_name(cfg.normalization);
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_epsilon"] = cfg.adam_epsilon;
  return j.dump(2);
}

SyntheticScenario scenario_from_json_string(const std::string& text) {
  const json j = parse_object(text, "scenario config");
  StrictObject obj(j);
  SyntheticScenario sc;
  sc.area_width_m = obj.number("area_width_m", sc.area_width_m);
  sc.area_height_m = obj.number("area_height_m", sc.area_height_m);
  sc.rp_grid_nx = obj.unsigned_integer("rp_grid_nx", sc.rp_grid_nx);
  sc.rp_grid_ny = obj.unsigned_integer("rp_grid_ny", sc.rp_grid_ny);
  sc.rp_spacing_m = obj.number("rp_spacing_m", sc.rp_spacing_m);
  sc.ap_grid_nx = obj.unsigned_integer("ap_grid_nx", sc.ap_grid_nx);
  sc.ap_grid_ny = obj.unsigned_integer("ap_grid_ny", sc.ap_grid_ny);
  sc.path_loss_exponent =
      obj.number("path_loss_exponent", sc.path_loss_exponent);
  sc.ref_power_dbm = obj.number("ref_power_dbm", sc.ref_power_dbm);
  sc.ref_distance_m = obj.number("ref_distance_m", sc.ref_distance_m);
  sc.shadowing_sigma_db =
      obj.number("shadowing_sigma_db", sc.shadowing_sigma_db);
  sc.train_samples_per_rp =
      obj.unsigned_integer("train_samples_per_rp", sc.train_samples_per_rp);
  sc.test_samples_per_rp =
      obj.unsigned_integer("test_samples_per_rp", sc.test_samples_per_rp);
  sc.seed = obj.unsigned_integer("seed", sc.seed);
  obj.reject_unknown("scenario config");
  return sc;
}

SyntheticScenario scenario_from_json_file(const std::string& path) {
  return scenario_from_json_string(read_file(path));
}

std::string scenario_to_json_string(const SyntheticScenario& sc) {
  json j;
  j["area_width_m"] = sc.area_width_m;
  j["area_height_m"] = sc.area_height_m;
  j["rp_grid_nx"] = sc.rp_grid_nx;
  j["rp_grid_ny"] = sc.rp_grid_ny;
  j["rp_spacing_m"] = sc.rp_spacing_m;
  j["ap_grid_nx"] = sc.ap_grid_nx;
  j["ap_grid_ny"] = sc.ap_grid_ny;
  j["path_loss_exponent"] = sc.path_loss_exponent;
  j["ref_power_dbm"] = sc.ref_power_dbm;
  j["ref_distance_m"] = sc.ref_distance_m;
  j["shadowing_sigma_db"] = sc.shadowing_sigma_db;
  j["train_samples_per_rp"] = sc.train_samples_per_rp;
  j["test_samples_per_rp"] = sc.test_samples_per_rp;
  j["seed"] = sc.seed;
  return j.dump(2);
}

}  // namespace fploc
