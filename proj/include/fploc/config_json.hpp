#pragma once

#include <string>

#include "fploc/data.hpp"
#include "fploc/train_eval.hpp"

namespace fploc {

// Flat key-value JSON configs. Every key has a default; unknown keys and
// wrongly-typed values are rejected with a ConfigError naming the key, so
// typos cannot silently fall back to defaults.

TrainingConfig training_config_from_json_string(const std::string& text);
TrainingConfig training_config_from_json_file(const std::string& path);
// Resolved config (all defaults materialized), for run manifests.
std::string training_config_to_json_string(const TrainingConfig& config);

SyntheticScenario scenario_from_json_string(const std::string& text);
SyntheticScenario scenario_from_json_file(const std::string& path);
std::string scenario_to_json_string(const SyntheticScenario& scenario);

}  // namespace fploc
