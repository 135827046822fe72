#pragma once

#include <vector>

#include "spotcheck/harness.hpp"

namespace spotcheck {

// Configuration documents are JSON objects (TOML files are converted first) with
// optional sections: suite, oracle, train, induction, planespot, metrics, sweep.
// Unknown sections or keys are rejected with InvalidArgument.

SuiteOptions suite_options_from_json(const Json& cfg, Seed master_seed);
TrainConfig train_config_from_json(const Json& cfg);
InductionThresholds induction_thresholds_from_json(const Json& cfg);
BdmConfig bdm_config_from_json(const Json& cfg);

/// Cartesian product of the `sweep` section's value lists applied to the base
/// discovery configuration, e.g. `{"weight": [0, 0.025]}`.
std::vector<BdmConfig> sweep_grid_from_json(const Json& cfg);

Json to_json(const BdmConfig& cfg);

}  // namespace spotcheck
