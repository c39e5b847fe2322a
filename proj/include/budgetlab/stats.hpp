#pragma once

#include <cstdint>
#include <span>

namespace budgetlab {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct PairedT {
  int n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  Interval ci95;
};

// Two-sided one-sample t on the differences. Zero variance: p = 1 when the
// mean is 0, p = 0 otherwise, with the CI collapsed to the mean.
PairedT paired_t(std::span<const double> diffs);

// Percentile interval (2.5%, 97.5%) of the bootstrap distribution of the mean.
Interval bootstrap_ci(std::span<const double> diffs, int b_reps, std::uint64_t seed);

double normalized_return(double policy_return, double oracle_return);
double improvement_pct(double policy, double base);
double oracle_gap_pct(double oracle, double policy);

}  // namespace budgetlab
