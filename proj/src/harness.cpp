#include "budgetlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "budgetlab/stats.hpp"

namespace budgetlab {

namespace {

constexpr std::uint64_t kControllerNoiseSalt = 0x70662d6d7063ULL;

std::vector<std::string> outcome_labels(const TrialReport& t) {
  std::vector<std::string> labels;
  for (const auto& o : t.outcomes) {
    std::string base(to_string(o.kind));
    const auto repeats = std::count_if(labels.begin(), labels.end(), [&](const std::string& l) {
      return l == base || l.rfind(base + "#", 0) == 0;
    });
    labels.push_back(repeats == 0 ? base : base + "#" + std::to_string(repeats + 1));
  }
  return labels;
}

struct Series {
  std::vector<double> values;
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return values.empty() ? 0.0 : s / static_cast<double>(values.size());
  }
};

Interval t_interval(const std::vector<double>& v) {
  if (v.size() < 2) {
    const double m = v.empty() ? 0.0 : v.front();
    return {m, m};
  }
  return paired_t(v).ci95;
}

}  // namespace

const ControllerOutcome* TrialReport::find(ControllerKind kind) const {
  for (const auto& o : outcomes) {
    if (o.kind == kind) return &o;
  }
  return nullptr;
}

std::uint64_t trial_seed(std::uint64_t master_seed, int trial_id) {
  return mix64(master_seed ^ mix64(0x747269616cULL + static_cast<std::uint64_t>(trial_id)));
}

ControllerOutcome run_controller(Controller& controller, QuarterState state, const EvaluationPath& truth,
                                 const ExecutionConfig& exec, const NoiseStream& noise,
                                 const TrialOptions& options) {
  ControllerOutcome out;
  out.kind = controller.kind();
  KeyRecorder recorder;
  const double budget = state.quarter_budget;
  for (int t = 1; t <= state.weeks; ++t) {
    const double remaining = state.remaining_budget;
    const double b = controller.plan(state);
    if (!(b >= 0.0) || !std::isfinite(b)) {
      throw std::runtime_error(std::string(to_string(out.kind)) + " planned an invalid budget in week " +
                               std::to_string(t));
    }
    std::string status;
    if (const HorizonSolution* sol = controller.last_solution()) {
      status = to_string(sol->status);
      if (sol->status == SolveStatus::kRelaxedFeasible) ++out.relaxed_solves;
      if (sol->status == SolveStatus::kMaxIter) ++out.maxiter_solves;
      if (options.debug_dumps && controller.last_problem() != nullptr) {
        out.solver_dumps.push_back(horizon_dump_json(*controller.last_problem(), *sol));
      }
    }
    ExecutionConfig week_exec = exec;
    week_exec.tracking_rate = truth.tracking_rate[t - 1];
    const WeekRecord rec = step_week(state.last_day_spend, b, week_exec, truth.theta[t - 1],
                                     truth.efficiency[t - 1], noise, t, &recorder);
    controller.observe(rec);
    state.record(rec);
    out.trace.push_back(rec);
    out.remaining_before.push_back(remaining);
    out.solver_status.push_back(std::move(status));
    out.total_return += rec.realized_return;
    out.total_spend += rec.realized_spend;
  }
  out.utilization = budget > 0.0 ? out.total_spend / budget : 0.0;
  out.env_keys = recorder.sorted_unique();
  return out;
}

TrialReport run_trial(const ExperimentConfig& config, int trial_id, const TrialOptions& options) {
  TrialReport rep;
  rep.trial_id = trial_id;
  rep.seed = trial_seed(config.master_seed, trial_id);
  const NoiseStream noise(rep.seed);
  const int W = config.env.weeks_per_quarter;

  try {
    const HistorySimulation hist = generate_history(config.env, config.regime, noise);
    rep.quarter_budget = construct_quarter_budget(hist.data, config.env.budget, noise);
    const EvaluationPath truth = evaluation_path(hist, config.env, config.regime, noise, W);

    ControllerContext ctx;
    ctx.history = &hist.data;
    ctx.env = &config.env;
    ctx.regime = config.regime;
    ctx.truth = &truth;
    ctx.noise = noise.derive(kControllerNoiseSalt);
    ctx.settings = config.settings;
    ctx.quarter = config.env.budget.quarter;

    const double anchor = config.settings.anchor_scale * rep.quarter_budget / W;
    const QuarterState start = QuarterState::start(rep.quarter_budget, W, anchor, hist.data.last_day_spend());

    std::vector<ControllerKind> kinds = config.controllers;
    if (std::find(kinds.begin(), kinds.end(), ControllerKind::kMpcOracle) == kinds.end()) {
      kinds.push_back(ControllerKind::kMpcOracle);
    }
    for (ControllerKind k : kinds) {
      auto ctrl = make_controller(k, ctx);
      rep.outcomes.push_back(run_controller(*ctrl, start, truth, config.env.exec, noise, options));
    }
    rep.oracle_return = rep.find(ControllerKind::kMpcOracle)->total_return;
  } catch (const std::exception& e) {
    rep.failed = true;
    rep.failure = e.what();
    rep.outcomes.clear();
  }
  return rep;
}

std::vector<TrialReport> run_experiment(const ExperimentConfig& config, int jobs, const TrialOptions& options,
                                        const std::function<void(int)>& on_trial_done) {
  const int n = config.n_trials;
  std::vector<TrialReport> out(n);
  int workers = jobs > 0 ? jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n);
  std::atomic<int> next{0};
  std::mutex done_mu;
  auto work = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      out[i] = run_trial(config, i, options);
      if (on_trial_done) {
        std::lock_guard<std::mutex> lock(done_mu);
        on_trial_done(i);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

bool audit_pairing(const TrialReport& trial) {
  for (std::size_t i = 1; i < trial.outcomes.size(); ++i) {
    if (trial.outcomes[i].env_keys != trial.outcomes[0].env_keys) return false;
  }
  return true;
}

ExperimentSummary summarize(const ExperimentConfig& config, const std::vector<TrialReport>& trials) {
  ExperimentSummary s;
  std::vector<const TrialReport*> ok;
  for (const auto& t : trials) {
    if (t.failed || !(t.oracle_return > 0.0)) {
      ++s.n_failed;
      s.failures.push_back("trial " + std::to_string(t.trial_id) + ": " +
                           (t.failed ? t.failure : "non-positive oracle return"));
      continue;
    }
    if (!audit_pairing(t)) ++s.pairing_violations;
    ok.push_back(&t);
  }
  s.n_trials = static_cast<int>(ok.size());
  if (ok.empty()) return s;

  const std::vector<std::string> labels = outcome_labels(*ok.front());
  const std::size_t k = labels.size();
  std::vector<Series> ret(k), norm(k), util(k), gap(k);
  std::vector<int> relaxed(k, 0), maxiter(k, 0);
  int base = -1;
  for (std::size_t c = 0; c < k; ++c) {
    if (ok.front()->outcomes[c].kind == ControllerKind::kBaselinePacing) {
      base = static_cast<int>(c);
      break;
    }
  }
  std::vector<Series> delta(k);

  // Trials are visited in id order, so the reduction is independent of the
  // thread schedule.
  for (const TrialReport* t : ok) {
    for (std::size_t c = 0; c < k; ++c) {
      const ControllerOutcome& o = t->outcomes[c];
      ret[c].values.push_back(o.total_return);
      norm[c].values.push_back(normalized_return(o.total_return, t->oracle_return));
      util[c].values.push_back(o.utilization);
      gap[c].values.push_back(oracle_gap_pct(t->oracle_return, o.total_return));
      relaxed[c] += o.relaxed_solves;
      maxiter[c] += o.maxiter_solves;
      if (base >= 0) {
        delta[c].values.push_back(improvement_pct(o.total_return, t->outcomes[base].total_return));
      }
    }
  }

  for (std::size_t c = 0; c < k; ++c) {
    ControllerSummary cs;
    cs.label = labels[c];
    cs.kind = ok.front()->outcomes[c].kind;
    cs.mean_return = ret[c].mean();
    cs.mean_normalized = norm[c].mean();
    cs.mean_utilization = util[c].mean();
    cs.mean_gap_pct = gap[c].mean();
    cs.gap_t_ci = t_interval(gap[c].values);
    cs.gap_bootstrap_ci = bootstrap_ci(gap[c].values, config.bootstrap_reps, config.master_seed + 2 * c);
    cs.relaxed_solves = relaxed[c];
    cs.maxiter_solves = maxiter[c];
    s.controllers.push_back(cs);

    if (base < 0 || static_cast<int>(c) == base) continue;
    ComparisonSummary cmp;
    cmp.label = labels[c];
    cmp.mean_delta_pct = delta[c].mean();
    if (delta[c].values.size() >= 2) {
      const PairedT pt = paired_t(delta[c].values);
      cmp.delta_t_ci = pt.ci95;
      cmp.t_stat = pt.t_stat;
      cmp.p_value = pt.p_value;
    } else {
      cmp.delta_t_ci = {cmp.mean_delta_pct, cmp.mean_delta_pct};
    }
    cmp.delta_bootstrap_ci = bootstrap_ci(delta[c].values, config.bootstrap_reps, config.master_seed + 2 * c + 1);
    cmp.mean_gap_pct = cs.mean_gap_pct;
    cmp.gap_t_ci = cs.gap_t_ci;
    cmp.gap_bootstrap_ci = cs.gap_bootstrap_ci;
    s.comparisons.push_back(cmp);
  }
  return s;
}

}  // namespace budgetlab
