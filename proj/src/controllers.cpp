#include "budgetlab/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace budgetlab {

QuarterState QuarterState::start(double quarter_budget, int weeks, double anchor,
                                 double last_day_spend) {
  if (weeks < 1) throw std::invalid_argument("QuarterState: weeks must be >= 1");
  QuarterState s;
  s.week = 1;
  s.weeks = weeks;
  s.quarter_budget = quarter_budget;
  s.remaining_budget = quarter_budget;
  s.last_budget = anchor;
  s.last_day_spend = last_day_spend;
  return s;
}

void QuarterState::record(const WeekRecord& rec) {
  if (week > weeks) throw std::logic_error("QuarterState: quarter already finished");
  remaining_budget = remaining_budget - rec.realized_spend;
  last_budget = rec.planned_budget;
  last_day_spend = rec.end_of_week_daily_spend;
  history_so_far.push_back(rec);
  ++week;
}

PacingRatios uniform_ratios(int weeks) {
  if (weeks < 1) throw std::invalid_argument("pacing ratios need weeks >= 1");
  return {std::vector<double>(weeks, 1.0 / weeks), RatioSource::kUniform};
}

PacingRatios compute_pacing_ratios(const HistoryDataset& history, int quarter, int weeks) {
  if (weeks < 1) throw std::invalid_argument("pacing ratios need weeks >= 1");
  const int start = history.num_weeks() - kWeeksPerYear + weeks * (quarter - 1);
  if (history.num_weeks() < kWeeksPerYear || start < 0 || start + weeks > history.num_weeks()) {
    return uniform_ratios(weeks);
  }
  std::vector<double> r(weeks);
  double total = 0.0;
  for (int t = 0; t < weeks; ++t) {
    r[t] = std::max(0.0, history.weekly[start + t].spend);
    total += r[t];
  }
  if (!(total > 0.0) || !std::isfinite(total)) return uniform_ratios(weeks);
  for (double& v : r) v /= total;
  return {std::move(r), RatioSource::kHistorical};
}

double baseline_plan_week(const QuarterState& state, const PacingRatios& ratios) {
  const int t = state.week;
  if (t < 1 || t > static_cast<int>(ratios.ratios.size())) {
    throw std::invalid_argument("baseline_plan_week: week outside the quarter");
  }
  const double remaining = std::max(0.0, state.remaining_budget);
  double tail = 0.0;
  for (std::size_t j = t - 1; j < ratios.ratios.size(); ++j) tail += ratios.ratios[j];
  if (!(tail > 0.0)) return remaining;
  return remaining * ratios.ratios[t - 1] / tail;
}

double spend_predictor_identity(double b) { return b; }

namespace {

double tracking_lag_sum(double alpha) {
  double sum = 0.0;
  double f = 1.0;
  for (int d = 1; d <= kDaysPerWeek; ++d) {
    f *= 1.0 - alpha;
    sum += f;
  }
  return sum;
}

}  // namespace

double spend_predictor_tracking(double b, double prev_day_spend, double alpha) {
  const double target = b / kDaysPerWeek;
  return kDaysPerWeek * target + (prev_day_spend - target) * tracking_lag_sum(alpha);
}

SpendMap spend_map_for(const SpendPredictor& predictor, int h, double prev_day_spend) {
  if (predictor.kind == SpendPredictorKind::kIdentity || h > 0) return {1.0, 0.0};
  const double lag = tracking_lag_sum(predictor.alpha);
  return {1.0 - lag / kDaysPerWeek, std::max(0.0, prev_day_spend) * lag};
}

MpcDecision mpc_plan_week(const QuarterState& state, const std::vector<ResponseFn>& responses,
                          const SpendPredictor& predictor, const RegimeSpec& regime,
                          const MpcOptions& options) {
  const int H = state.weeks_left();
  if (H < 1) throw std::invalid_argument("mpc_plan_week: quarter already finished");
  if (static_cast<int>(responses.size()) != H) {
    throw std::invalid_argument("mpc_plan_week: forecast horizon " + std::to_string(responses.size()) +
                                " differs from weeks left " + std::to_string(H));
  }
  MpcDecision d;
  HorizonProblem& p = d.problem;
  for (int h = 0; h < H; ++h) {
    p.terms.push_back({responses[h], spend_map_for(predictor, h, state.last_day_spend)});
  }
  p.budget_cap = std::max(0.0, state.remaining_budget);
  p.anchor = std::max(0.0, state.last_budget);
  p.lower_ratio = 1.0 - regime.smooth_lower;
  p.upper_ratio = 1.0 + regime.smooth_upper;
  p.bounds_active = options.guardrails;
  p.allow_nonconcave = options.allow_nonconcave;
  d.solution = solve_horizon(p, options.solver);
  d.budget = d.solution.budgets.front();
  return d;
}

MpcDecision mpc_plan_week(const QuarterState& state, const ThetaForecast& forecast,
                          const SpendPredictor& predictor, const RegimeSpec& regime,
                          const MpcOptions& options) {
  forecast.validate();
  std::vector<ResponseFn> fns;
  fns.reserve(forecast.values.size());
  for (const auto& th : forecast.values) fns.push_back(exp_saturation_fn(th));
  return mpc_plan_week(state, fns, predictor, regime, options);
}

ResponseFn richards_weekly_fn(const EnvTheta& theta, double efficiency) {
  theta.validate();
  return [theta, efficiency](double s) {
    const double daily = s / kDaysPerWeek;
    return CurvePoint{kDaysPerWeek * efficiency * richards_response(daily, theta),
                      efficiency * richards_slope(daily, theta),
                      efficiency * richards_curvature(daily, theta) / kDaysPerWeek};
  };
}

std::vector<ResponseFn> oracle_theta_forecast(const EvaluationPath& truth, int week, int horizon) {
  if (week < 1 || horizon < 1 || week - 1 + horizon > static_cast<int>(truth.theta.size())) {
    throw std::invalid_argument("oracle_theta_forecast: weeks outside the evaluation path");
  }
  std::vector<ResponseFn> fns;
  for (int h = 0; h < horizon; ++h) {
    const int i = week - 1 + h;
    fns.push_back(richards_weekly_fn(truth.theta[i], truth.efficiency[i]));
  }
  return fns;
}

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kBaselinePacing:
      return "baseline";
    case ControllerKind::kMpcStatic:
      return "mpc_static";
    case ControllerKind::kMpcParticleFilter:
      return "mpc_pf";
    case ControllerKind::kMpcSeasonal:
      return "mpc_seasonal";
    case ControllerKind::kMpcOracle:
      return "oracle";
  }
  return "unknown";
}

std::optional<ControllerKind> controller_kind_from_string(std::string_view name) {
  for (auto k : {ControllerKind::kBaselinePacing, ControllerKind::kMpcStatic,
                 ControllerKind::kMpcParticleFilter, ControllerKind::kMpcSeasonal,
                 ControllerKind::kMpcOracle}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::vector<ResponseFn> StaticSource::responses(const QuarterState& state) {
  return std::vector<ResponseFn>(state.weeks_left(), exp_saturation_fn(theta_));
}

std::vector<ResponseFn> ParticleFilterSource::responses(const QuarterState& state) {
  return std::vector<ResponseFn>(state.weeks_left(), exp_saturation_fn(pf_posterior_mean(particles_)));
}

void ParticleFilterSource::observe(const WeekRecord& rec) {
  // Evaluation steps are keyed apart from the warm-up steps.
  ++step_;
  PfStepResult r = pf_update(particles_, {rec.realized_spend, rec.realized_return}, rw_sigma_, obs_sd_,
                             noise_, 100000 + step_);
  if (r.degenerate) ++degenerate_;
  particles_ = std::move(r.particles);
}

std::vector<ResponseFn> SeasonalSource::responses(const QuarterState& state) {
  const ThetaForecast f =
      seasonal_predict(model_, first_label_ + state.week - 1, state.weeks_left());
  std::vector<ResponseFn> fns;
  for (const auto& th : f.values) fns.push_back(exp_saturation_fn(th));
  return fns;
}

std::vector<ResponseFn> OracleSource::responses(const QuarterState& state) {
  return oracle_theta_forecast(*truth_, state.week, state.weeks_left());
}

double MpcController::plan(const QuarterState& state) {
  MpcOptions opt = options_;
  opt.allow_nonconcave = opt.allow_nonconcave || source_->nonconcave();
  last_ = mpc_plan_week(state, source_->responses(state), predictor_, regime_, opt);
  return last_->budget;
}

FitResult fit_history(const HistoryDataset& history, int weeks) {
  const int n = history.num_weeks();
  const int k = weeks <= 0 ? n : std::min(weeks, n);
  const auto obs = weekly_observations(history, n - k, k);
  return fit_exp_saturation(obs);
}

std::unique_ptr<Controller> make_controller(ControllerKind kind, const ControllerContext& ctx) {
  if (ctx.history == nullptr || ctx.env == nullptr) {
    throw std::invalid_argument("make_controller: history and env are required");
  }
  const HistoryDataset& hist = *ctx.history;
  const ControllerSettings& st = ctx.settings;
  const int W = ctx.env->weeks_per_quarter;

  if (kind == ControllerKind::kBaselinePacing) {
    return std::make_unique<BaselineController>(compute_pacing_ratios(hist, ctx.quarter, W));
  }

  std::unique_ptr<ForecastSource> source;
  switch (kind) {
    case ControllerKind::kMpcStatic:
      source = std::make_unique<StaticSource>(fit_history(hist, st.static_fit_weeks).theta);
      break;
    case ControllerKind::kMpcParticleFilter: {
      const int n = hist.num_weeks();
      const int k = std::min(st.pf_prior_weeks, n);
      const auto obs = weekly_observations(hist, n - k, k);
      const FitResult fit = fit_exp_saturation(obs);
      double mean_r = 0.0;
      for (const auto& o : obs) mean_r += o.ret;
      mean_r /= static_cast<double>(obs.size());
      const double dof = std::max(1.0, static_cast<double>(obs.size()) - 2.0);
      const double obs_sd = std::max(std::sqrt(fit.residual_sse / dof), st.pf_obs_sd_floor * std::abs(mean_r));
      const double rw = st.pf_rw_sigma < 0.0 ? ctx.regime.rw_sigma : st.pf_rw_sigma;
      ParticleSet ps = pf_init(fit.theta, st.pf_spread, st.pf_particles, ctx.noise);
      for (int i = 0; i < static_cast<int>(obs.size()); ++i) {
        ps = pf_update(ps, obs[i], rw, obs_sd, ctx.noise, i + 1).particles;
      }
      source = std::make_unique<ParticleFilterSource>(std::move(ps), rw, obs_sd, ctx.noise);
      break;
    }
    case ControllerKind::kMpcSeasonal: {
      const RollingIdentification ident = rolling_identify(hist, st.rolling);
      source = std::make_unique<SeasonalSource>(seasonal_fit(ident.thetas, W), hist.next_week_label());
      break;
    }
    case ControllerKind::kMpcOracle:
      if (ctx.truth == nullptr) throw std::invalid_argument("oracle controller needs the true path");
      source = std::make_unique<OracleSource>(ctx.truth);
      break;
    case ControllerKind::kBaselinePacing:
      break;
  }

  SpendPredictor pred{st.predictor, ctx.env->exec.tracking_rate};
  MpcOptions opt;
  opt.guardrails = st.guardrails;
  opt.solver = st.solver;
  return std::make_unique<MpcController>(kind, std::move(source), pred, ctx.regime, opt);
}

}  // namespace budgetlab
