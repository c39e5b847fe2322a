#include "budgetlab/forecast.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cfloat>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "budgetlab/error.hpp"
#include "budgetlab/kernels.hpp"

namespace budgetlab {

void ThetaForecast::validate() const {
  if (values.empty()) throw std::invalid_argument("forecast horizon must be >= 1");
  for (const auto& v : values) v.validate();
}

ThetaForecast static_forecast(const CtrlTheta& theta_hat, int horizon, int base_week) {
  if (horizon < 1) throw std::invalid_argument("static_forecast: horizon must be >= 1");
  theta_hat.validate();
  return {base_week, std::vector<CtrlTheta>(horizon, theta_hat)};
}

void ParticleSet::validate() const {
  const std::size_t n = weights.size();
  if (n < 1 || log_rho.size() != n || log_kappa.size() != n) {
    throw std::invalid_argument("particle arrays must be non-empty and equally sized");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("negative particle weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("particle weights do not sum to 1");
}

double effective_sample_size(std::span<const double> weights) {
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  return 1.0 / sq;
}

ParticleSet pf_init(const CtrlTheta& prior, double spread, int n_particles, const NoiseStream& noise) {
  if (n_particles < 2) throw std::invalid_argument("pf_init: need at least 2 particles");
  if (!(spread >= 0.0)) throw std::invalid_argument("pf_init: spread must be >= 0");
  prior.validate();
  ParticleSet ps;
  const auto n = static_cast<std::size_t>(n_particles);
  ps.log_rho.resize(n);
  ps.log_kappa.resize(n);
  ps.weights.assign(n, 1.0 / n_particles);
  const double lr = std::log(prior.rho_max);
  const double lk = std::log(prior.kappa);
  for (std::uint32_t i = 0; i < n; ++i) {
    ps.log_rho[i] = lr + spread * noise.normal({0, 0, Purpose::kPfInit, 2 * i});
    ps.log_kappa[i] = lk + spread * noise.normal({0, 0, Purpose::kPfInit, 2 * i + 1});
  }
  ps.ess = static_cast<double>(n_particles);
  return ps;
}

namespace {

void systematic_resample(ParticleSet& ps, double u0) {
  const std::size_t n = ps.weights.size();
  std::vector<double> rho(n), kap(n);
  double cum = ps.weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (u0 + static_cast<double>(i)) / static_cast<double>(n);
    while (u > cum && j + 1 < n) cum += ps.weights[++j];
    rho[i] = ps.log_rho[j];
    kap[i] = ps.log_kappa[j];
  }
  ps.log_rho = std::move(rho);
  ps.log_kappa = std::move(kap);
  ps.weights.assign(n, 1.0 / static_cast<double>(n));
  ps.ess = static_cast<double>(n);
}

}  // namespace

PfStepResult pf_update(const ParticleSet& ps, const SpendReturn& observed, double rw_sigma,
                       double obs_sd, const NoiseStream& noise, int step,
                       const PfUpdateOptions& options) {
  if (!(observed.spend >= 0.0)) throw DomainError("pf_update: spend must be >= 0");
  if (!(obs_sd > 0.0)) throw std::invalid_argument("pf_update: obs_sd must be positive");
  if (!(rw_sigma >= 0.0)) throw std::invalid_argument("pf_update: rw_sigma must be >= 0");

  PfStepResult out;
  out.particles = ps;
  ParticleSet& p = out.particles;
  const std::size_t n = p.weights.size();

  if (rw_sigma > 0.0) {
    for (std::uint32_t i = 0; i < n; ++i) {
      p.log_rho[i] += rw_sigma * noise.normal({step, 0, Purpose::kPfProcess, 2 * i});
      p.log_kappa[i] += rw_sigma * noise.normal({step, 0, Purpose::kPfProcess, 2 * i + 1});
    }
  }

  std::vector<double> loglik(n);
  kernels::exp_saturation_loglik(p.log_rho, p.log_kappa, observed.spend, observed.ret,
                                 1.0 / obs_sd, loglik);
  const double max_ll = *std::max_element(loglik.begin(), loglik.end());

  if (!(max_ll >= std::log(DBL_MIN))) {
    p.weights.assign(n, 1.0 / static_cast<double>(n));
    p.ess = static_cast<double>(n);
    out.degenerate = true;
  } else {
    // Combine with prior weights in the log domain, then exponentiate relative
    // to the maximum so the largest term is exactly 1.
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      loglik[i] += std::log(p.weights[i]);
      shift = std::max(shift, loglik[i]);
    }
    const double sum = kernels::exp_shifted_sum(loglik, shift);
    const double sum_sq = kernels::scale_sum_squares(loglik, 1.0 / sum);
    p.weights = std::move(loglik);
    p.ess = std::clamp(1.0 / sum_sq, 1.0, static_cast<double>(n));
  }

  if (p.ess < options.resample_threshold * static_cast<double>(n)) {
    systematic_resample(p, noise.uniform({step, 0, Purpose::kPfResample, 0}));
    out.resampled = true;
    const double jitter = options.jitter_fraction * rw_sigma;
    if (jitter > 0.0) {
      for (std::uint32_t i = 0; i < n; ++i) {
        p.log_rho[i] += jitter * noise.normal({step, 0, Purpose::kPfJitter, 2 * i});
        p.log_kappa[i] += jitter * noise.normal({step, 0, Purpose::kPfJitter, 2 * i + 1});
      }
    }
  }
  return out;
}

CtrlTheta pf_posterior_mean(const ParticleSet& ps) {
  return {std::exp(kernels::dot(ps.weights, ps.log_rho)),
          std::exp(kernels::dot(ps.weights, ps.log_kappa))};
}

ThetaForecast pf_forecast(const ParticleSet& ps, int horizon, int base_week) {
  return static_forecast(pf_posterior_mean(ps), horizon, base_week);
}

void write_particles_csv(const ParticleSet& ps, std::ostream& out) {
  out << "index,log_rho_max,log_kappa,weight\n" << std::setprecision(12);
  for (int i = 0; i < ps.size(); ++i) {
    out << i << ',' << ps.log_rho[i] << ',' << ps.log_kappa[i] << ',' << ps.weights[i] << '\n';
  }
}

double SeasonalModel::Component::predict(int week_label, int weeks_per_quarter) const {
  return intercept + trend * week_label +
         week_effects[week_of_quarter(week_label, weeks_per_quarter) - 1];
}

SeasonalModel seasonal_fit(std::span<const IdentifiedTheta> identified, int weeks_per_quarter) {
  const int W = weeks_per_quarter;
  if (W < 1) throw std::invalid_argument("seasonal_fit: weeks_per_quarter must be >= 1");
  const int n = static_cast<int>(identified.size());
  const int p = W + 1;  // intercept, trend, W-1 free effects
  if (n < p) {
    throw RankDeficientError("seasonal_fit: " + std::to_string(n) +
                             " identified weeks cannot determine " + std::to_string(p) +
                             " coefficients; need at least two quarters");
  }

  // Effect coding: column j (j < W) is +1 in week-of-quarter j+1 and -1 in
  // week-of-quarter W, so the implied W-th effect is minus the sum.
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, p);
  Eigen::MatrixXd Y(n, 2);
  for (int i = 0; i < n; ++i) {
    const int w = identified[i].week_label;
    X(i, 0) = 1.0;
    X(i, 1) = w;
    const int q = week_of_quarter(w, W);
    if (q < W) {
      X(i, 1 + q) = 1.0;
    } else {
      for (int j = 2; j < p; ++j) X(i, j) = -1.0;
    }
    Y(i, 0) = std::log(identified[i].theta.rho_max);
    Y(i, 1) = std::log(identified[i].theta.kappa);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) {
    throw RankDeficientError("seasonal_fit: design matrix has rank " + std::to_string(qr.rank()) +
                             " < " + std::to_string(p) + "; need at least two quarters");
  }
  const Eigen::MatrixXd beta = qr.solve(Y);

  SeasonalModel model;
  model.weeks_per_quarter = W;
  model.n = n;
  model.sse = (Y - X * beta).squaredNorm();
  auto unpack = [&](int col) {
    SeasonalModel::Component c;
    c.intercept = beta(0, col);
    c.trend = beta(1, col);
    c.week_effects.assign(W, 0.0);
    double sum = 0.0;
    for (int j = 0; j + 1 < W; ++j) {
      c.week_effects[j] = beta(2 + j, col);
      sum += c.week_effects[j];
    }
    c.week_effects[W - 1] = -sum;
    return c;
  };
  model.rho = unpack(0);
  model.kappa = unpack(1);
  return model;
}

ThetaForecast seasonal_predict(const SeasonalModel& model, int base_week, int horizon) {
  if (horizon < 1) throw std::invalid_argument("seasonal_predict: horizon must be >= 1");
  ThetaForecast f;
  f.base_week = base_week;
  f.values.reserve(horizon);
  for (int h = 0; h < horizon; ++h) {
    const int w = base_week + h;
    f.values.push_back({std::exp(model.rho.predict(w, model.weeks_per_quarter)),
                        std::exp(model.kappa.predict(w, model.weeks_per_quarter))});
  }
  return f;
}

}  // namespace budgetlab
