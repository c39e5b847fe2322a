#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "budgetlab/noise.hpp"
#include "budgetlab/response.hpp"

namespace budgetlab {

// Point forecasts theta_{tau+h|tau}, h = 0..H-1.
struct ThetaForecast {
  int base_week = 1;
  std::vector<CtrlTheta> values;

  int horizon() const { return static_cast<int>(values.size()); }
  void validate() const;
};

ThetaForecast static_forecast(const CtrlTheta& theta_hat, int horizon, int base_week = 1);

// Particles in log(rho_max), log(kappa), stored as parallel arrays.
struct ParticleSet {
  std::vector<double> log_rho;
  std::vector<double> log_kappa;
  std::vector<double> weights;
  double ess = 0.0;

  int size() const { return static_cast<int>(weights.size()); }
  void validate() const;
};

struct PfStepResult {
  ParticleSet particles;
  bool resampled = false;
  bool degenerate = false;  // every likelihood underflowed; weights were reset
};

struct PfUpdateOptions {
  double resample_threshold = 0.5;  // resample when ess < threshold * N
  double jitter_fraction = 0.2;     // post-resample jitter sd, relative to rw_sigma
};

double effective_sample_size(std::span<const double> weights);

ParticleSet pf_init(const CtrlTheta& prior, double spread, int n_particles, const NoiseStream& noise);

// One propagate/reweight/resample cycle. `step` keys the noise draws and must
// differ between calls on the same stream.
PfStepResult pf_update(const ParticleSet& ps, const SpendReturn& observed, double rw_sigma,
                       double obs_sd, const NoiseStream& noise, int step,
                       const PfUpdateOptions& options = {});

// exp of the weighted mean of the log particles.
CtrlTheta pf_posterior_mean(const ParticleSet& ps);
ThetaForecast pf_forecast(const ParticleSet& ps, int horizon, int base_week = 1);

void write_particles_csv(const ParticleSet& ps, std::ostream& out);

// log theta_w = intercept + trend * w + week_effects[woq(w) - 1], fitted
// separately for rho_max and kappa. Effects sum to zero.
struct SeasonalModel {
  struct Component {
    double intercept = 0.0;
    double trend = 0.0;
    std::vector<double> week_effects;

    double predict(int week_label, int weeks_per_quarter) const;
  };

  Component rho;
  Component kappa;
  int weeks_per_quarter = 12;
  double sse = 0.0;  // log-space residual sum of squares over both parameters
  int n = 0;
};

SeasonalModel seasonal_fit(std::span<const IdentifiedTheta> identified, int weeks_per_quarter);
ThetaForecast seasonal_predict(const SeasonalModel& model, int base_week, int horizon);

}  // namespace budgetlab
