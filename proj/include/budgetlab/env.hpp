#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "budgetlab/noise.hpp"

namespace budgetlab {

inline constexpr int kDaysPerWeek = 7;
inline constexpr int kWeeksPerYear = 52;
inline constexpr int kDaysPerYear = kDaysPerWeek * kWeeksPerYear;
inline constexpr int kWeeksPerMonth = 4;
inline constexpr int kMonthsPerYear = 12;

// True latent response parameters: A (daily asymptote), k (curvature per unit
// of daily spend) and the Richards shape exponent.
struct EnvTheta {
  double amplitude = 500.0;
  double rate = 0.001;
  double shape = 1.6;

  void validate() const;
  bool operator==(const EnvTheta&) const = default;
};

enum class RegimeKind { kStatic, kRandomWalk, kSeasonal };
enum class DeclineForm { kExponential, kGeometric };

struct RegimeSpec {
  RegimeKind kind = RegimeKind::kStatic;
  double rw_sigma = 0.0;      // log-space innovation sd, random walk only
  double decline_rate = 0.0;  // within-quarter decline, seasonal only
  DeclineForm decline_form = DeclineForm::kGeometric;
  double smooth_lower = 0.3;  // planned budget may fall at most this fraction per week
  double smooth_upper = 0.3;  // ... and rise at most this fraction

  void validate() const;
};

struct ExecutionConfig {
  double tracking_rate = 0.6;      // alpha in (0,1)
  double exec_noise_coeff = 1.0;   // daily delivery noise variance = coeff^2 * daily target
  double obs_noise_sd = 5.0;       // daily return observation noise sd
  bool drift_tracking = false;     // let alpha drift under the random-walk regime

  void validate() const;
};

// Planned-spend schedule that drives the historical period.
struct HistoryConfig {
  int years = 2;
  double annual_budget = 364000.0;
  double annual_amplitude = 0.3;   // relative amplitude of the yearly cycle
  int annual_peak_day = 42;        // day-of-year of the yearly peak
  double weekday_amplitude = 0.3;  // relative amplitude of a 7-day cycle

  void validate() const;
};

struct BudgetConfig {
  double lambda_lo = 0.9;
  double lambda_hi = 1.1;
  int quarter = 1;  // evaluation quarter of the year, 1..4 (months 3q-2..3q)

  void validate() const;
};

struct EnvConfig {
  EnvTheta theta;
  ExecutionConfig exec;
  HistoryConfig history;
  BudgetConfig budget;
  int weeks_per_quarter = 12;
};

struct WeekRecord {
  int week = 0;
  double planned_budget = 0.0;
  double realized_spend = 0.0;
  double realized_return = 0.0;
  std::array<double, kDaysPerWeek> daily_spend{};
  std::array<double, kDaysPerWeek> daily_return{};
  double end_of_week_daily_spend = 0.0;

  bool operator==(const WeekRecord&) const = default;
};

struct WeeklyAggregate {
  int week_label = 0;
  double spend = 0.0;
  double ret = 0.0;
};

// Daily history with implicit contiguous day indices 0..D-1. Week labels
// number the seasonal calendar: woq(label) = ((label-1) mod W) + 1, phased so
// that the evaluation quarter following the history starts at woq 1.
struct HistoryDataset {
  int years = 0;
  int first_week_label = 1;
  std::vector<double> daily_spend;
  std::vector<double> daily_return;
  std::vector<WeeklyAggregate> weekly;

  int num_days() const { return static_cast<int>(daily_spend.size()); }
  int num_weeks() const { return static_cast<int>(weekly.size()); }
  int next_week_label() const { return first_week_label + num_weeks(); }
  double last_day_spend() const;

  // Rebuilds `weekly` from the daily series.
  void aggregate_weeks();
  void validate() const;
};

struct HistorySimulation {
  HistoryDataset data;
  std::vector<EnvTheta> theta_path;     // one entry per history week
  std::vector<double> efficiency;       // seasonal factor per history week
  std::vector<double> tracking_rate;    // alpha per history week
};

// Latent path of the evaluation quarter. Visible to the oracle only.
struct EvaluationPath {
  std::vector<EnvTheta> theta;
  std::vector<double> efficiency;
  std::vector<double> tracking_rate;
};

double richards_response(double spend, const EnvTheta& theta);

// First and second derivative of richards_response with respect to spend.
double richards_slope(double spend, const EnvTheta& theta);
double richards_curvature(double spend, const EnvTheta& theta);

WeekRecord step_week(double prev_day_spend, double budget, const ExecutionConfig& exec,
                     const EnvTheta& theta, double efficiency, const NoiseStream& noise,
                     int week, KeyRecorder* recorder = nullptr);

EnvTheta advance_theta(const EnvTheta& theta, const RegimeSpec& regime,
                       const NoiseStream& noise, int week);

double advance_tracking_rate(double alpha, const ExecutionConfig& exec, const RegimeSpec& regime,
                             const NoiseStream& noise, int week);

int week_of_quarter(long week_label, int weeks_per_quarter);
double seasonal_factor(int week_of_quarter, const RegimeSpec& regime);

HistorySimulation generate_history(const EnvConfig& config, const RegimeSpec& regime,
                                   const NoiseStream& noise);

EvaluationPath evaluation_path(const HistorySimulation& history, const EnvConfig& config,
                               const RegimeSpec& regime, const NoiseStream& noise, int weeks);

// Spend per 4-week month of the final historical year; the 13th block is
// merged into month 12.
std::array<double, kMonthsPerYear> final_year_monthly_spend(const HistoryDataset& history);

double quarter_budget_from_months(std::span<const double> monthly_spend, double lambda,
                                  int first_month, int months);

double construct_quarter_budget(const HistoryDataset& history, const BudgetConfig& budget,
                                const NoiseStream& noise);

void write_history_csv(const HistoryDataset& history, std::ostream& out);

}  // namespace budgetlab
