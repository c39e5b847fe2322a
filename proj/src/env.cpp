#include "budgetlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "budgetlab/error.hpp"

namespace budgetlab {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

struct DayKeys {
  Purpose exec;
  Purpose obs;
  std::int64_t week;
};

// Tracking recursion for one week with per-day targets.
WeekRecord simulate_days(double prev_day_spend, const std::array<double, kDaysPerWeek>& targets,
                         double alpha, const ExecutionConfig& exec, const EnvTheta& theta,
                         double efficiency, const NoiseStream& noise, const DayKeys& keys,
                         KeyRecorder* recorder) {
  WeekRecord rec;
  double s = prev_day_spend;
  for (int d = 0; d < kDaysPerWeek; ++d) {
    const NoiseKey exec_key{keys.week, d + 1, keys.exec, 0};
    const NoiseKey obs_key{keys.week, d + 1, keys.obs, 0};
    if (recorder != nullptr) {
      recorder->record(exec_key);
      recorder->record(obs_key);
    }
    const double target = targets[d];
    const double xi = exec.exec_noise_coeff * std::sqrt(std::max(target, 0.0)) * noise.normal(exec_key);
    s = std::max(0.0, s + alpha * (target - s) + xi);
    rec.daily_spend[d] = s;
    rec.daily_return[d] =
        efficiency * richards_response(s, theta) + exec.obs_noise_sd * noise.normal(obs_key);
    rec.realized_spend += s;
    rec.realized_return += rec.daily_return[d];
  }
  rec.end_of_week_daily_spend = s;
  return rec;
}

EnvTheta drift_theta(const EnvTheta& theta, const RegimeSpec& regime, const NoiseStream& noise,
                     std::int64_t week, Purpose amp_purpose, Purpose rate_purpose) {
  if (regime.kind != RegimeKind::kRandomWalk || regime.rw_sigma == 0.0) return theta;
  EnvTheta next = theta;
  next.amplitude *= std::exp(regime.rw_sigma * noise.normal({week, 0, amp_purpose, 0}));
  next.rate *= std::exp(regime.rw_sigma * noise.normal({week, 0, rate_purpose, 0}));
  return next;
}

double drift_alpha(double alpha, const ExecutionConfig& exec, const RegimeSpec& regime,
                   const NoiseStream& noise, std::int64_t week, Purpose purpose) {
  if (!exec.drift_tracking || regime.kind != RegimeKind::kRandomWalk || regime.rw_sigma == 0.0) {
    return alpha;
  }
  const double logit = std::log(alpha / (1.0 - alpha)) +
                       regime.rw_sigma * noise.normal({week, 0, purpose, 0});
  return 1.0 / (1.0 + std::exp(-logit));
}

}  // namespace

void EnvTheta::validate() const {
  require(std::isfinite(amplitude) && amplitude > 0.0, "EnvTheta.amplitude must be positive");
  require(std::isfinite(rate) && rate > 0.0, "EnvTheta.rate must be positive");
  require(std::isfinite(shape) && shape > 0.0, "EnvTheta.shape must be positive");
}

void RegimeSpec::validate() const {
  require(std::isfinite(rw_sigma) && rw_sigma >= 0.0, "rw_sigma must be >= 0");
  require(decline_rate >= 0.0 && decline_rate < 1.0, "decline_rate must lie in [0, 1)");
  require(smooth_lower >= 0.0 && smooth_lower < 1.0, "smooth_lower must lie in [0, 1)");
  require(std::isfinite(smooth_upper) && smooth_upper >= 0.0, "smooth_upper must be >= 0");
}

void ExecutionConfig::validate() const {
  require(tracking_rate > 0.0 && tracking_rate <= 1.0, "tracking_rate must lie in (0, 1]");
  require(std::isfinite(exec_noise_coeff) && exec_noise_coeff >= 0.0, "exec_noise_coeff must be >= 0");
  require(std::isfinite(obs_noise_sd) && obs_noise_sd >= 0.0, "obs_noise_sd must be >= 0");
}

void HistoryConfig::validate() const {
  require(years >= 1, "history.years must be >= 1");
  require(std::isfinite(annual_budget) && annual_budget > 0.0, "history.annual_budget must be positive");
  require(annual_amplitude >= 0.0 && annual_amplitude < 1.0, "history.annual_amplitude must lie in [0, 1)");
  require(weekday_amplitude >= 0.0 && weekday_amplitude < 1.0, "history.weekday_amplitude must lie in [0, 1)");
}

void BudgetConfig::validate() const {
  require(lambda_lo > 0.0 && lambda_hi >= lambda_lo, "budget lambda range must satisfy 0 < lo <= hi");
  require(quarter >= 1 && quarter <= 4, "budget.quarter must lie in 1..4");
}

double HistoryDataset::last_day_spend() const {
  if (daily_spend.empty()) throw std::invalid_argument("empty history");
  return daily_spend.back();
}

void HistoryDataset::aggregate_weeks() {
  weekly.clear();
  const int weeks = num_days() / kDaysPerWeek;
  weekly.reserve(weeks);
  for (int w = 0; w < weeks; ++w) {
    WeeklyAggregate agg{first_week_label + w, 0.0, 0.0};
    for (int d = 0; d < kDaysPerWeek; ++d) {
      agg.spend += daily_spend[w * kDaysPerWeek + d];
      agg.ret += daily_return[w * kDaysPerWeek + d];
    }
    weekly.push_back(agg);
  }
}

void HistoryDataset::validate() const {
  require(daily_spend.size() == daily_return.size(), "daily spend and return lengths differ");
  require(daily_spend.size() % kDaysPerWeek == 0, "history must contain whole weeks");
  require(weekly.size() == daily_spend.size() / kDaysPerWeek, "weekly aggregates out of date");
}

double richards_response(double spend, const EnvTheta& theta) {
  if (!std::isfinite(spend) || spend < 0.0) {
    throw DomainError("richards_response: spend must be finite and >= 0, got " + std::to_string(spend));
  }
  const double u = -std::expm1(-theta.rate * spend);
  return theta.amplitude * std::pow(u, theta.shape);
}

double richards_slope(double spend, const EnvTheta& theta) {
  const double e = std::exp(-theta.rate * spend);
  const double u = -std::expm1(-theta.rate * spend);
  return theta.amplitude * theta.shape * theta.rate * e * std::pow(u, theta.shape - 1.0);
}

double richards_curvature(double spend, const EnvTheta& theta) {
  const double e = std::exp(-theta.rate * spend);
  const double u = -std::expm1(-theta.rate * spend);
  const double nu = theta.shape;
  const double k = theta.rate;
  if (u == 0.0) {
    if (nu == 1.0) return -theta.amplitude * k * k;
    return nu > 2.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return theta.amplitude * nu * k * k * e * std::pow(u, nu - 2.0) * ((nu - 1.0) * e - u);
}

WeekRecord step_week(double prev_day_spend, double budget, const ExecutionConfig& exec,
                     const EnvTheta& theta, double efficiency, const NoiseStream& noise, int week,
                     KeyRecorder* recorder) {
  if (!(budget >= 0.0) || !(prev_day_spend >= 0.0) || !(efficiency > 0.0)) {
    throw std::invalid_argument("step_week: budget, prev_day_spend must be >= 0 and efficiency > 0");
  }
  std::array<double, kDaysPerWeek> targets;
  targets.fill(budget / kDaysPerWeek);
  WeekRecord rec = simulate_days(prev_day_spend, targets, exec.tracking_rate, exec, theta, efficiency,
                                 noise, {Purpose::kExecution, Purpose::kObservation, week}, recorder);
  rec.week = week;
  rec.planned_budget = budget;
  return rec;
}

EnvTheta advance_theta(const EnvTheta& theta, const RegimeSpec& regime, const NoiseStream& noise,
                       int week) {
  return drift_theta(theta, regime, noise, week, Purpose::kDriftAmplitude, Purpose::kDriftRate);
}

double advance_tracking_rate(double alpha, const ExecutionConfig& exec, const RegimeSpec& regime,
                             const NoiseStream& noise, int week) {
  return drift_alpha(alpha, exec, regime, noise, week, Purpose::kDriftTracking);
}

int week_of_quarter(long week_label, int weeks_per_quarter) {
  const long m = ((week_label - 1) % weeks_per_quarter + weeks_per_quarter) % weeks_per_quarter;
  return static_cast<int>(m) + 1;
}

double seasonal_factor(int woq, const RegimeSpec& regime) {
  if (regime.kind != RegimeKind::kSeasonal) return 1.0;
  if (regime.decline_form == DeclineForm::kExponential) {
    return std::exp(-regime.decline_rate * woq);
  }
  return std::pow(1.0 - regime.decline_rate, woq);
}

HistorySimulation generate_history(const EnvConfig& config, const RegimeSpec& regime,
                                   const NoiseStream& noise) {
  config.theta.validate();
  config.exec.validate();
  config.history.validate();
  regime.validate();

  const HistoryConfig& hc = config.history;
  const int W = config.weeks_per_quarter;
  const int n_weeks = kWeeksPerYear * hc.years;

  HistorySimulation sim;
  HistoryDataset& data = sim.data;
  data.years = hc.years;
  data.first_week_label = 1 + (W - n_weeks % W) % W;
  data.daily_spend.reserve(n_weeks * kDaysPerWeek);
  data.daily_return.reserve(n_weeks * kDaysPerWeek);

  const double daily_base = hc.annual_budget / kDaysPerYear;
  auto target_of = [&](int day) {
    const int doy = day % kDaysPerYear;
    const int dow = day % kDaysPerWeek;
    const double yearly =
        1.0 + hc.annual_amplitude *
                  std::cos(2.0 * std::numbers::pi * (doy - hc.annual_peak_day) / kDaysPerYear);
    const double weekly =
        1.0 + hc.weekday_amplitude * std::sin(2.0 * std::numbers::pi * dow / kDaysPerWeek);
    return daily_base * yearly * weekly;
  };

  EnvTheta theta = config.theta;
  double alpha = config.exec.tracking_rate;
  double prev = target_of(0);
  for (int i = 0; i < n_weeks; ++i) {
    if (i > 0) {
      theta = drift_theta(theta, regime, noise, i, Purpose::kHistDriftAmplitude,
                          Purpose::kHistDriftRate);
      alpha = drift_alpha(alpha, config.exec, regime, noise, i, Purpose::kHistDriftTracking);
    }
    const int label = data.first_week_label + i;
    const double eff = seasonal_factor(week_of_quarter(label, W), regime);
    std::array<double, kDaysPerWeek> targets;
    for (int d = 0; d < kDaysPerWeek; ++d) targets[d] = target_of(i * kDaysPerWeek + d);
    const WeekRecord rec = simulate_days(prev, targets, alpha, config.exec, theta, eff, noise,
                                         {Purpose::kHistExecution, Purpose::kHistObservation, i},
                                         nullptr);
    data.daily_spend.insert(data.daily_spend.end(), rec.daily_spend.begin(), rec.daily_spend.end());
    data.daily_return.insert(data.daily_return.end(), rec.daily_return.begin(),
                             rec.daily_return.end());
    prev = rec.end_of_week_daily_spend;
    sim.theta_path.push_back(theta);
    sim.efficiency.push_back(eff);
    sim.tracking_rate.push_back(alpha);
  }
  data.aggregate_weeks();
  return sim;
}

EvaluationPath evaluation_path(const HistorySimulation& history, const EnvConfig& config,
                               const RegimeSpec& regime, const NoiseStream& noise, int weeks) {
  EvaluationPath path;
  EnvTheta theta = history.theta_path.empty() ? config.theta : history.theta_path.back();
  double alpha = history.tracking_rate.empty() ? config.exec.tracking_rate
                                               : history.tracking_rate.back();
  const int first_label = history.data.next_week_label();
  for (int t = 1; t <= weeks; ++t) {
    theta = advance_theta(theta, regime, noise, t);
    alpha = advance_tracking_rate(alpha, config.exec, regime, noise, t);
    path.theta.push_back(theta);
    path.tracking_rate.push_back(alpha);
    path.efficiency.push_back(
        seasonal_factor(week_of_quarter(first_label + t - 1, config.weeks_per_quarter), regime));
  }
  return path;
}

std::array<double, kMonthsPerYear> final_year_monthly_spend(const HistoryDataset& history) {
  if (history.num_weeks() < kWeeksPerYear) {
    throw std::invalid_argument("history must cover at least one full year");
  }
  std::array<double, kMonthsPerYear> months{};
  const int start = history.num_weeks() - kWeeksPerYear;
  for (int w = 0; w < kWeeksPerYear; ++w) {
    const int m = std::min(w / kWeeksPerMonth, kMonthsPerYear - 1);
    months[m] += history.weekly[start + w].spend;
  }
  return months;
}

double quarter_budget_from_months(std::span<const double> monthly_spend, double lambda,
                                  int first_month, int months) {
  if (monthly_spend.size() != static_cast<std::size_t>(kMonthsPerYear)) {
    throw std::invalid_argument("expected 12 monthly totals");
  }
  if (first_month < 1 || months < 1 || first_month + months - 1 > kMonthsPerYear) {
    throw std::invalid_argument("quarter months out of range");
  }
  double s_year = 0.0;
  for (double h : monthly_spend) s_year += h;
  if (!(s_year > 0.0)) throw std::invalid_argument("historical annual spend must be positive");
  const double scaled_year = lambda * s_year;
  double budget = 0.0;
  for (int m = first_month - 1; m < first_month - 1 + months; ++m) {
    budget += (monthly_spend[m] / s_year) * scaled_year;
  }
  return budget;
}

double construct_quarter_budget(const HistoryDataset& history, const BudgetConfig& budget,
                                const NoiseStream& noise) {
  budget.validate();
  if (history.num_days() == 0) throw std::invalid_argument("construct_quarter_budget: empty history");
  const auto months = final_year_monthly_spend(history);
  const double lambda = budget.lambda_lo + (budget.lambda_hi - budget.lambda_lo) *
                                               noise.uniform({0, 0, Purpose::kBudgetScale, 0});
  return quarter_budget_from_months(months, lambda, 3 * (budget.quarter - 1) + 1, 3);
}

void write_history_csv(const HistoryDataset& history, std::ostream& out) {
  out << "day,spend,return\n";
  out << std::setprecision(12);
  for (int d = 0; d < history.num_days(); ++d) {
    out << d << ',' << history.daily_spend[d] << ',' << history.daily_return[d] << '\n';
  }
}

}  // namespace budgetlab
