#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "budgetlab/controllers.hpp"
#include "budgetlab/env.hpp"
#include "json.hpp"

namespace budgetlab {

struct SweepSpec {
  std::string parameter;
  std::vector<double> values;
};

struct ExperimentConfig {
  std::string name = "experiment";
  RegimeSpec regime;
  EnvConfig env;
  std::vector<ControllerKind> controllers;  // reported controllers; the oracle always runs
  ControllerSettings settings;
  int n_trials = 200;
  std::uint64_t master_seed = 1;
  int bootstrap_reps = 10000;
  std::string output_dir = "out";
  std::optional<SweepSpec> sweep;

  void validate() const;
};

// Parses a config document, filling every omitted field with its default.
// Errors are ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

// Fully resolved config; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& config);

const std::vector<std::string>& sweepable_parameters();

// Sets a sweepable scalar by name. Throws ConfigError for unknown names or
// out-of-range values.
void apply_parameter(ExperimentConfig& config, const std::string& name, double value);

std::string to_string(RegimeKind kind);

}  // namespace budgetlab
