#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "budgetlab/config.hpp"
#include "budgetlab/controllers.hpp"
#include "budgetlab/env.hpp"
#include "budgetlab/stats.hpp"

namespace budgetlab {

struct ControllerOutcome {
  ControllerKind kind = ControllerKind::kBaselinePacing;
  std::vector<WeekRecord> trace;
  std::vector<double> remaining_before;     // B_rem entering each week
  std::vector<std::string> solver_status;   // empty strings for the baseline
  double total_return = 0.0;
  double total_spend = 0.0;
  double utilization = 0.0;
  int relaxed_solves = 0;
  int maxiter_solves = 0;
  std::vector<NoiseKey> env_keys;           // environment draws consumed, sorted
  std::vector<std::string> solver_dumps;    // JSON per week, only with debug dumps
};

struct TrialReport {
  int trial_id = 0;
  std::uint64_t seed = 0;
  double quarter_budget = 0.0;
  double oracle_return = 0.0;
  bool failed = false;
  std::string failure;
  // One entry per configured controller, in config order, then the oracle
  // when it was not configured.
  std::vector<ControllerOutcome> outcomes;

  const ControllerOutcome* find(ControllerKind kind) const;
};

struct TrialOptions {
  bool debug_dumps = false;
};

std::uint64_t trial_seed(std::uint64_t master_seed, int trial_id);

// Closed loop over one quarter: plan, execute with the shared noise stream,
// observe, update the accounting.
ControllerOutcome run_controller(Controller& controller, QuarterState state, const EvaluationPath& truth,
                                 const ExecutionConfig& exec, const NoiseStream& noise,
                                 const TrialOptions& options = {});

TrialReport run_trial(const ExperimentConfig& config, int trial_id, const TrialOptions& options = {});

// Trials run on `jobs` worker threads (0 = hardware concurrency). Results are
// ordered by trial id regardless of scheduling.
std::vector<TrialReport> run_experiment(const ExperimentConfig& config, int jobs,
                                        const TrialOptions& options = {},
                                        const std::function<void(int)>& on_trial_done = {});

// True when every controller of the trial consumed the same environment keys.
bool audit_pairing(const TrialReport& trial);

struct ControllerSummary {
  std::string label;  // controller name, suffixed with #k for repeats
  ControllerKind kind = ControllerKind::kBaselinePacing;
  double mean_return = 0.0;
  double mean_normalized = 0.0;
  double mean_utilization = 0.0;
  double mean_gap_pct = 0.0;
  Interval gap_t_ci;
  Interval gap_bootstrap_ci;
  int relaxed_solves = 0;
  int maxiter_solves = 0;
};

struct ComparisonSummary {
  std::string label;  // policy compared against the baseline
  double mean_delta_pct = 0.0;
  Interval delta_t_ci;
  Interval delta_bootstrap_ci;
  double t_stat = 0.0;
  double p_value = 1.0;
  double mean_gap_pct = 0.0;
  Interval gap_t_ci;
  Interval gap_bootstrap_ci;
};

struct ExperimentSummary {
  int n_trials = 0;      // trials used
  int n_failed = 0;      // trials excluded for every controller
  std::vector<std::string> failures;
  std::vector<ControllerSummary> controllers;
  std::vector<ComparisonSummary> comparisons;
  int pairing_violations = 0;
};

ExperimentSummary summarize(const ExperimentConfig& config, const std::vector<TrialReport>& trials);

}  // namespace budgetlab
