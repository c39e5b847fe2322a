#pragma once

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "budgetlab/env.hpp"
#include "budgetlab/forecast.hpp"
#include "budgetlab/noise.hpp"
#include "budgetlab/response.hpp"
#include "budgetlab/solver.hpp"

namespace budgetlab {

struct QuarterState {
  int week = 1;   // tau, 1..W+1
  int weeks = 12; // W
  double quarter_budget = 0.0;
  double remaining_budget = 0.0;
  double last_budget = 0.0;     // b_{tau-1}; the anchor before week 1
  double last_day_spend = 0.0;  // tracking state entering week tau
  std::vector<WeekRecord> history_so_far;

  static QuarterState start(double quarter_budget, int weeks, double anchor, double last_day_spend);

  int weeks_left() const { return weeks - week + 1; }
  // Applies B_rem <- B_rem - s and advances to the next week.
  void record(const WeekRecord& rec);
};

enum class RatioSource { kHistorical, kUniform };

struct PacingRatios {
  std::vector<double> ratios;
  RatioSource source = RatioSource::kUniform;
};

PacingRatios uniform_ratios(int weeks);

// Share of each week in the matching quarter of the final historical year
// (the quarter starting 52 weeks before the evaluation quarter when quarter
// is 1; W*(quarter-1) weeks later otherwise). Falls back to uniform.
PacingRatios compute_pacing_ratios(const HistoryDataset& history, int quarter, int weeks);

double baseline_plan_week(const QuarterState& state, const PacingRatios& ratios);

enum class SpendPredictorKind { kIdentity, kTracking };

struct SpendPredictor {
  SpendPredictorKind kind = SpendPredictorKind::kIdentity;
  double alpha = 1.0;  // tracking rate assumed by the tracking predictor
};

double spend_predictor_identity(double b);
// Expected weekly spend of the noise-free tracking recursion started at s0.
double spend_predictor_tracking(double b, double prev_day_spend, double alpha);

// Affine predicted-spend map for planning offset h. Only the current week
// sees the actual tracking state; later weeks assume steady state.
SpendMap spend_map_for(const SpendPredictor& predictor, int h, double prev_day_spend);

struct MpcOptions {
  bool guardrails = true;
  bool allow_nonconcave = false;
  SolverOptions solver;
};

struct MpcDecision {
  double budget = 0.0;
  HorizonSolution solution;
  HorizonProblem problem;
};

MpcDecision mpc_plan_week(const QuarterState& state, const std::vector<ResponseFn>& responses,
                          const SpendPredictor& predictor, const RegimeSpec& regime,
                          const MpcOptions& options = {});
MpcDecision mpc_plan_week(const QuarterState& state, const ThetaForecast& forecast,
                          const SpendPredictor& predictor, const RegimeSpec& regime,
                          const MpcOptions& options = {});

// Weekly return 7 * g * R(s / 7) of the true Richards curve, assuming the
// week's spend is spread evenly over its days.
ResponseFn richards_weekly_fn(const EnvTheta& theta, double efficiency);

// True effective responses for evaluation weeks week..week+horizon-1.
std::vector<ResponseFn> oracle_theta_forecast(const EvaluationPath& truth, int week, int horizon);

enum class ControllerKind { kBaselinePacing, kMpcStatic, kMpcParticleFilter, kMpcSeasonal, kMpcOracle };

std::string_view to_string(ControllerKind kind);
std::optional<ControllerKind> controller_kind_from_string(std::string_view name);

struct ControllerSettings {
  SpendPredictorKind predictor = SpendPredictorKind::kIdentity;
  double anchor_scale = 1.0;  // week-1 anchor = anchor_scale * B_Q / W
  bool guardrails = true;
  SolverOptions solver;

  // Static MPC: weeks of history used for the single fit (0 = all).
  int static_fit_weeks = 0;

  int pf_particles = 1000;
  double pf_spread = 0.3;
  int pf_prior_weeks = 26;      // history weeks for the prior fit and warm-up
  double pf_rw_sigma = -1.0;    // < 0: use the regime's rw_sigma
  double pf_obs_sd_floor = 0.01;  // relative to the mean weekly return

  RollingOptions rolling;
};

// Everything a controller may look at before and during the quarter. `truth`
// is only read by the oracle.
struct ControllerContext {
  const HistoryDataset* history = nullptr;
  const EnvConfig* env = nullptr;
  RegimeSpec regime;
  const EvaluationPath* truth = nullptr;
  NoiseStream noise{0};  // controller-private randomness (particle filter)
  ControllerSettings settings;
  int quarter = 1;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControllerKind kind() const = 0;
  // Planned budget for state.week. Called exactly once per week.
  virtual double plan(const QuarterState& state) = 0;
  virtual void observe(const WeekRecord& /*rec*/) {}
  // Solver outcome of the latest plan() call, if any.
  virtual const HorizonSolution* last_solution() const { return nullptr; }
  virtual const HorizonProblem* last_problem() const { return nullptr; }
};

class BaselineController : public Controller {
 public:
  explicit BaselineController(PacingRatios ratios) : ratios_(std::move(ratios)) {}
  ControllerKind kind() const override { return ControllerKind::kBaselinePacing; }
  double plan(const QuarterState& state) override { return baseline_plan_week(state, ratios_); }
  const PacingRatios& ratios() const { return ratios_; }

 private:
  PacingRatios ratios_;
};

// Supplies the per-week response functions an MPC controller optimizes.
class ForecastSource {
 public:
  virtual ~ForecastSource() = default;
  virtual std::vector<ResponseFn> responses(const QuarterState& state) = 0;
  virtual void observe(const WeekRecord& /*rec*/) {}
  virtual bool nonconcave() const { return false; }
};

class StaticSource : public ForecastSource {
 public:
  explicit StaticSource(CtrlTheta theta) : theta_(theta) {}
  std::vector<ResponseFn> responses(const QuarterState& state) override;
  const CtrlTheta& theta() const { return theta_; }

 private:
  CtrlTheta theta_;
};

class ParticleFilterSource : public ForecastSource {
 public:
  ParticleFilterSource(ParticleSet particles, double rw_sigma, double obs_sd, NoiseStream noise)
      : particles_(std::move(particles)), rw_sigma_(rw_sigma), obs_sd_(obs_sd), noise_(noise) {}
  std::vector<ResponseFn> responses(const QuarterState& state) override;
  void observe(const WeekRecord& rec) override;
  const ParticleSet& particles() const { return particles_; }
  double obs_sd() const { return obs_sd_; }
  int degenerate_updates() const { return degenerate_; }

 private:
  ParticleSet particles_;
  double rw_sigma_;
  double obs_sd_;
  NoiseStream noise_;
  int step_ = 0;
  int degenerate_ = 0;
};

class SeasonalSource : public ForecastSource {
 public:
  SeasonalSource(SeasonalModel model, int first_week_label)
      : model_(std::move(model)), first_label_(first_week_label) {}
  std::vector<ResponseFn> responses(const QuarterState& state) override;
  const SeasonalModel& model() const { return model_; }

 private:
  SeasonalModel model_;
  int first_label_;
};

class OracleSource : public ForecastSource {
 public:
  explicit OracleSource(const EvaluationPath* truth) : truth_(truth) {}
  std::vector<ResponseFn> responses(const QuarterState& state) override;
  bool nonconcave() const override { return true; }

 private:
  const EvaluationPath* truth_;
};

class MpcController : public Controller {
 public:
  MpcController(ControllerKind kind, std::unique_ptr<ForecastSource> source, SpendPredictor predictor,
                RegimeSpec regime, MpcOptions options)
      : kind_(kind), source_(std::move(source)), predictor_(predictor), regime_(regime),
        options_(options) {}

  ControllerKind kind() const override { return kind_; }
  double plan(const QuarterState& state) override;
  void observe(const WeekRecord& rec) override { source_->observe(rec); }
  const HorizonSolution* last_solution() const override {
    return last_ ? &last_->solution : nullptr;
  }
  const HorizonProblem* last_problem() const override { return last_ ? &last_->problem : nullptr; }
  ForecastSource& source() { return *source_; }

 private:
  ControllerKind kind_;
  std::unique_ptr<ForecastSource> source_;
  SpendPredictor predictor_;
  RegimeSpec regime_;
  MpcOptions options_;
  std::optional<MpcDecision> last_;
};

// Fit of the static response on the last `weeks` history weeks (0 = all).
FitResult fit_history(const HistoryDataset& history, int weeks);

std::unique_ptr<Controller> make_controller(ControllerKind kind, const ControllerContext& ctx);

}  // namespace budgetlab
