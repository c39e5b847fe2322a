#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "budgetlab/env.hpp"

namespace budgetlab {

// Control-facing response: weekly return rho_max * (1 - exp(-kappa * spend)).
struct CtrlTheta {
  double rho_max = 1.0;
  double kappa = 1e-3;

  void validate() const;
  bool operator==(const CtrlTheta&) const = default;
};

struct SpendReturn {
  double spend = 0.0;
  double ret = 0.0;
};

struct FitResult {
  CtrlTheta theta;
  double residual_sse = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;  // inf-norm of the projected SSE gradient in log-parameters, relative to sum r^2
};

struct FitOptions {
  int max_iterations = 300;
  double gradient_tol = 1e-10;
  // Accepted when no step lowers the SSE at working precision.
  double stall_gradient_tol = 1e-7;
  bool multi_start = true;
};

double exp_saturation(double spend, const CtrlTheta& theta);
double exp_saturation_slope(double spend, const CtrlTheta& theta);
double exp_saturation_curvature(double spend, const CtrlTheta& theta);

// d/d(rho_max) and d/d(kappa) of exp_saturation at `spend`.
std::array<double, 2> exp_saturation_jacobian(double spend, const CtrlTheta& theta);

double saturation_spend(double eta, const CtrlTheta& theta);

// Damped Gauss-Newton (Levenberg-Marquardt) in log-parameters with multi-start.
FitResult fit_exp_saturation(std::span<const SpendReturn> obs, const FitOptions& options = {});

struct IdentifiedTheta {
  int week_label = 0;
  CtrlTheta theta;
};

struct RollingOptions {
  int window_weeks = 5;
  // Windows never cross a boundary between consecutive blocks of this many
  // week labels (0 disables). Used to keep windows inside one seasonal cycle.
  int segment_weeks = 12;
  // Fit daily (spend, return) pairs inside the window and rescale to weekly
  // units instead of fitting the weekly aggregates.
  bool daily = true;
  // One kappa for every window, chosen by minimizing the summed window SSE
  // with per-window rho_max profiled out. Per-window (rho_max, kappa) fits
  // otherwise wander along the linear-limit valley when the data barely
  // bend.
  bool shared_curvature = true;
};

struct RollingIdentification {
  std::vector<IdentifiedTheta> thetas;
  std::vector<int> skipped_weeks;  // labels whose window fit failed
};

RollingIdentification rolling_identify(const HistoryDataset& history, const RollingOptions& options);

// Weekly observations of a history as fit input.
std::vector<SpendReturn> weekly_observations(const HistoryDataset& history, int first_week = 0,
                                             int count = -1);

// Converts a fit on daily (spend, return) pairs to weekly units, assuming a
// week is spent evenly across its days.
CtrlTheta daily_to_weekly(const CtrlTheta& daily);

void write_identified_csv(std::span<const IdentifiedTheta> thetas, std::ostream& out);

}  // namespace budgetlab
