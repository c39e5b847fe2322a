#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "budgetlab/config.hpp"
#include "budgetlab/harness.hpp"

namespace budgetlab {

void write_trials_csv(std::ostream& out, const std::vector<TrialReport>& trials);
void write_summary_csv(std::ostream& out, const ExperimentSummary& summary);
void write_traces_csv(std::ostream& out, const std::vector<TrialReport>& trials);
void write_report_md(std::ostream& out, const ExperimentConfig& config, const ExperimentSummary& summary);

// Weekly planned budgets of every controller in one trial as an SVG line chart.
void write_trajectory_svg(std::ostream& out, const TrialReport& trial);

struct SweepRow {
  double value = 0.0;
  ExperimentSummary summary;
};

void write_sweep_csv(std::ostream& out, const std::string& parameter, const std::vector<SweepRow>& rows);
void write_sweep_md(std::ostream& out, const ExperimentConfig& config, const std::string& parameter,
                    const std::vector<SweepRow>& rows);

struct OutputOptions {
  bool plots = false;
  int plot_trials = 5;
  bool debug_dumps = false;
};

// trials.csv, summary.csv, report.md and effective_config.json under `dir`,
// plus optional plots/ and debug/ directories.
void write_experiment_outputs(const std::string& dir, const ExperimentConfig& config,
                              const std::vector<TrialReport>& trials, const ExperimentSummary& summary,
                              const OutputOptions& options);

std::string format_number(double v);

}  // namespace budgetlab
