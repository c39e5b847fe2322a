// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance [config_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "budgetlab/config.hpp"
#include "budgetlab/forecast.hpp"
#include "budgetlab/harness.hpp"
#include "budgetlab/report.hpp"
#include "budgetlab/response.hpp"
#include "budgetlab/solver.hpp"
#include "budgetlab/stats.hpp"

using namespace budgetlab;

namespace {

std::string g_config_dir = BUDGETLAB_SOURCE_DIR "/configs";
int g_failures = 0;

// Every trace produced by the regime runs, for the accounting check.
std::vector<TrialReport> g_all_trials;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct RunResult {
  ExperimentSummary summary;
  double seconds = 0.0;
};

RunResult run_config(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  auto trials = run_experiment(c, 0);
  RunResult r{summarize(c, trials), seconds_since(t0)};
  g_all_trials.insert(g_all_trials.end(), std::make_move_iterator(trials.begin()),
                      std::make_move_iterator(trials.end()));
  return r;
}

const ComparisonSummary* comparison(const ExperimentSummary& s, const std::string& label) {
  for (const auto& c : s.comparisons) {
    if (c.label == label) return &c;
  }
  return nullptr;
}

const ControllerSummary* controller(const ExperimentSummary& s, const std::string& label) {
  for (const auto& c : s.controllers) {
    if (c.label == label) return &c;
  }
  return nullptr;
}

ExperimentConfig load(const char* name) { return load_config(g_config_dir + "/" + name); }

void ac1_static_parity() {
  const ExperimentConfig c = load("static.json");
  const RunResult r = run_config(c);
  const auto* cmp = comparison(r.summary, "mpc_static");
  const auto* base = controller(r.summary, "baseline");
  const auto* mpc = controller(r.summary, "mpc_static");
  if (!cmp || !base || !mpc) return report("AC-1", false, "static config lacks baseline or mpc_static");
  const bool pass = r.summary.n_trials >= 200 && std::abs(cmp->mean_delta_pct) <= 1.0 &&
                    base->mean_gap_pct <= 2.0 && mpc->mean_gap_pct <= 2.0 && r.seconds < 120.0;
  report("AC-1", pass,
         "static: n=" + std::to_string(r.summary.n_trials) + " delta=" + fmt("%+.3f%%", cmp->mean_delta_pct) +
             " gap_base=" + fmt("%.3f%%", base->mean_gap_pct) + " gap_mpc=" + fmt("%.3f%%", mpc->mean_gap_pct) +
             " time=" + fmt("%.1fs", r.seconds));
}

void ac2_drift() {
  bool pass = true;
  std::string detail;
  double gap[2] = {0.0, 0.0};
  const char* files[2] = {"drift_mild.json", "drift_moderate.json"};
  for (int i = 0; i < 2; ++i) {
    const ExperimentConfig c = load(files[i]);
    const RunResult r = run_config(c);
    const auto* cmp = comparison(r.summary, "mpc_pf");
    const auto* base = controller(r.summary, "baseline");
    const auto* pf = controller(r.summary, "mpc_pf");
    if (!cmp || !base || !pf) return report("AC-2", false, std::string(files[i]) + " lacks baseline or mpc_pf");
    pass = pass && r.summary.n_trials >= 200 && cmp->mean_delta_pct >= -1.5 && cmp->mean_delta_pct <= 0.5 &&
           base->mean_utilization >= 0.99 && pf->mean_utilization >= 0.99;
    gap[i] = pf->mean_gap_pct;
    detail += c.name + ": delta=" + fmt("%+.3f%%", cmp->mean_delta_pct) +
              " util=" + fmt("%.4f", base->mean_utilization) + "/" + fmt("%.4f", pf->mean_utilization) +
              " gap_pf=" + fmt("%.3f%%", pf->mean_gap_pct) + "; ";
  }
  pass = pass && gap[1] > gap[0];
  report("AC-2", pass, detail + "gap ordering " + (gap[1] > gap[0] ? "moderate > mild" : "violated"));
}

void ac3_seasonal_sweep() {
  const ExperimentConfig base = load("seasonal_sweep.json");
  const std::vector<double> deltas{0.05, 0.10, 0.15, 0.20};
  std::vector<double> d, g;
  std::string detail;
  for (double delta : deltas) {
    ExperimentConfig c = base;
    c.sweep.reset();
    apply_parameter(c, "decline_rate", delta);
    const RunResult r = run_config(c);
    const auto* cmp = comparison(r.summary, "mpc_seasonal");
    if (!cmp) return report("AC-3", false, "seasonal config lacks mpc_seasonal");
    d.push_back(cmp->mean_delta_pct);
    g.push_back(cmp->mean_gap_pct);
    detail += fmt("d=%.2f: ", delta) + fmt("delta=%+.2f%% ", cmp->mean_delta_pct) +
              fmt("gap=%.2f%%; ", cmp->mean_gap_pct);
  }
  // "Negative or about zero" at the mildest decline: at most +1%.
  const bool low = d[0] <= 1.0;
  const bool threshold = d[1] >= 2.0;
  const bool monotone = d[1] < d[2] && d[2] < d[3];
  const double range = *std::max_element(g.begin(), g.end()) - *std::min_element(g.begin(), g.end());
  report("AC-3", low && threshold && monotone && range < 3.0, detail + fmt("gap range=%.2fpp", range));
}

// Exhaustive reference for strictly increasing objectives with H <= 3: grid
// the first H-1 budgets, the last week takes the largest feasible amount.
struct Sat {
  double g, rho, kappa;
  double operator()(double b) const { return g * rho * -std::expm1(-kappa * b); }
};

double grid_optimum(const std::vector<Sat>& f, double cap, double anchor, bool bounds, double lo, double hi,
                    double step) {
  const int H = static_cast<int>(f.size());
  const double L = bounds ? lo : 0.0;
  const double U = bounds ? hi : std::numeric_limits<double>::infinity();
  const auto last = [&](double prev, double left) {
    const double b = std::min(left, U * prev);
    return b + 1e-12 >= L * prev ? std::max(b, 0.0) : -1.0;
  };
  if (H == 1) {
    const double b = last(anchor, cap);
    return b < 0.0 ? -1.0 : f[0](b);
  }
  double best = -1.0;
  for (double b1 = 0.0; b1 <= cap + 1e-12; b1 += step) {
    if (b1 < L * anchor - 1e-12 || b1 > U * anchor + 1e-12) continue;
    if (H == 2) {
      const double b2 = last(b1, cap - b1);
      if (b2 >= 0.0) best = std::max(best, f[0](b1) + f[1](b2));
      continue;
    }
    for (double b2 = 0.0; b1 + b2 <= cap + 1e-12; b2 += step) {
      if (b2 < L * b1 - 1e-12 || b2 > U * b1 + 1e-12) continue;
      const double b3 = last(b2, cap - b1 - b2);
      if (b3 >= 0.0) best = std::max(best, f[0](b1) + f[1](b2) + f[2](b3));
    }
  }
  return best;
}

HorizonProblem sat_problem(const std::vector<Sat>& fns, double cap, double anchor, bool bounds, double gamma) {
  HorizonProblem p;
  for (const auto& f : fns) p.terms.push_back({exp_saturation_fn({f.g * f.rho, f.kappa}), {}});
  p.budget_cap = cap;
  p.anchor = anchor;
  p.bounds_active = bounds;
  p.lower_ratio = 1.0 - gamma;
  p.upper_ratio = 1.0 + gamma;
  return p;
}

void ac4_solver() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int bad = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const int H = 1 + inst % 3;
    std::vector<Sat> f;
    for (int h = 0; h < H; ++h) f.push_back({0.5 + u(rng), 50.0 + 150.0 * u(rng), 0.005 + 0.045 * u(rng)});
    const double cap = 20.0 + 80.0 * u(rng);
    const double anchor = cap / H * (0.5 + u(rng));
    const bool bounds = inst % 2 == 0;
    const double gamma = u(rng) < 0.5 ? 0.2 : 0.3;
    const HorizonSolution s = solve_horizon(sat_problem(f, cap, anchor, bounds, gamma));
    const double grid =
        grid_optimum(f, cap, anchor, bounds, s.lower_bounds_relaxed ? 0.0 : 1.0 - gamma, 1.0 + gamma, 0.5);
    double mine = 0.0;
    for (int h = 0; h < H; ++h) mine += f[h](s.budgets[h]);
    const double shortfall = grid - mine;
    const double tol = std::max(1e-6, 1e-3 * std::abs(mine));
    worst = std::max(worst, shortfall / tol);
    if (shortfall > tol) ++bad;
  }
  const HorizonSolution a =
      solve_horizon(sat_problem({{1.0, 100.0, 0.01}, {std::exp(-0.2), 100.0, 0.01}}, 100.0, 0.0, false, 0.3));
  const double err = std::max(std::abs(a.budgets[0] - 60.0), std::abs(a.budgets[1] - 40.0));
  report("AC-4", bad == 0 && err <= 1e-4,
         "grid: " + std::to_string(200 - bad) + "/200 within tolerance (worst shortfall/tol " + fmt("%.3g", worst) +
             "); analytic (" + fmt("%.6f", a.budgets[0]) + ", " + fmt("%.6f", a.budgets[1]) + ") err " +
             fmt("%.2e", err));
}

void ac5_identification() {
  double worst_fit = 0.0;
  for (const CtrlTheta truth : {CtrlTheta{500.0, 0.002}, CtrlTheta{3500.0, 1.4e-4}, CtrlTheta{50.0, 0.02},
                                CtrlTheta{20000.0, 1e-4}, CtrlTheta{3.0, 0.3}}) {
    const double hi = 3.0 / truth.kappa;
    std::vector<SpendReturn> obs;
    for (int i = 0; i < 25; ++i) {
      const double s = hi * (0.05 + 0.95 * i / 24.0);
      obs.push_back({s, exp_saturation(s, truth)});
    }
    const FitResult fit = fit_exp_saturation(obs);
    worst_fit = std::max({worst_fit, std::abs(fit.theta.rho_max / truth.rho_max - 1.0),
                          std::abs(fit.theta.kappa / truth.kappa - 1.0)});
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lr(std::log(10.0), std::log(1e5));
  std::uniform_real_distribution<double> lk(std::log(1e-5), std::log(1e-1));
  std::uniform_real_distribution<double> lks(std::log(1e-3), std::log(10.0));
  double worst_jac = 0.0;
  for (int i = 0; i < 500; ++i) {
    const CtrlTheta th{std::exp(lr(rng)), std::exp(lk(rng))};
    const double s = std::exp(lks(rng)) / th.kappa;
    const auto j = exp_saturation_jacobian(s, th);
    const double hr = 1e-4 * th.rho_max, hk = 1e-4 * th.kappa;
    const double fr =
        (exp_saturation(s, {th.rho_max + hr, th.kappa}) - exp_saturation(s, {th.rho_max - hr, th.kappa})) / (2 * hr);
    const double fk =
        (exp_saturation(s, {th.rho_max, th.kappa + hk}) - exp_saturation(s, {th.rho_max, th.kappa - hk})) / (2 * hk);
    worst_jac = std::max({worst_jac, std::abs(j[0] / fr - 1.0), std::abs(j[1] / fk - 1.0)});
  }
  report("AC-5", worst_fit <= 1e-6 && worst_jac <= 1e-5,
         "noiseless recovery max rel err " + fmt("%.2e", worst_fit) + "; Jacobian vs FD max rel err " +
             fmt("%.2e", worst_jac));
}

void ac6_filter() {
  const int reps = 20, weeks = 12, n = 1000;
  const double rw = 0.05;
  double se_pf = 0.0, se_prior = 0.0;
  bool normalized = true, ess_ok = true;
  for (int rep = 0; rep < reps; ++rep) {
    const NoiseStream noise(1000 + rep);
    const CtrlTheta start{3500.0, 1.4e-4};
    double lr = std::log(start.rho_max), lk = std::log(start.kappa);
    ParticleSet ps = pf_init(start, 0.3, n, noise.derive(1));
    const double obs_sd = 0.01 * exp_saturation(7000.0, start);
    for (int w = 1; w <= weeks; ++w) {
      lr += rw * noise.normal({w, 0, Purpose::kDriftAmplitude, 0});
      lk += rw * noise.normal({w, 0, Purpose::kDriftRate, 0});
      const double s = w % 2 ? 4000.0 : 10000.0;
      const double r = exp_saturation(s, {std::exp(lr), std::exp(lk)}) +
                       obs_sd * noise.normal({w, 0, Purpose::kObservation, 0});
      const PfStepResult step = pf_update(ps, {s, r}, rw, obs_sd, noise.derive(2), w);
      ps = step.particles;
      double sum = 0.0;
      for (double x : ps.weights) sum += x;
      normalized = normalized && std::abs(sum - 1.0) <= 1e-12;
      ess_ok = ess_ok && ps.ess >= 1.0 - 1e-12 && ps.ess <= n + 1e-9;
      const CtrlTheta m = pf_posterior_mean(ps);
      se_pf += std::pow(std::log(m.rho_max) - lr, 2) + std::pow(std::log(m.kappa) - lk, 2);
      se_prior += std::pow(std::log(start.rho_max) - lr, 2) + std::pow(std::log(start.kappa) - lk, 2);
    }
  }
  const double rmse_pf = std::sqrt(se_pf / (2.0 * reps * weeks));
  const double rmse_prior = std::sqrt(se_prior / (2.0 * reps * weeks));
  report("AC-6", rmse_pf < rmse_prior && normalized && ess_ok,
         "log-theta RMSE pf=" + fmt("%.4f", rmse_pf) + " prior=" + fmt("%.4f", rmse_prior) + "; weights " +
             (normalized ? "normalized" : "NOT normalized") + "; ess " + (ess_ok ? "in [1, N]" : "out of range"));
}

void ac7_seasonal_forecaster() {
  double worst = 0.0;
  for (double delta : {0.05, 0.10, 0.15, 0.20}) {
    // Two years of weekly parameters with a log-linear trend and a geometric
    // within-quarter decline, then the next quarter.
    auto theta_at = [delta](int label) {
      const int woq = week_of_quarter(label, 12);
      const double decline = (woq - 1) * std::log1p(-delta);
      return CtrlTheta{std::exp(8.0 - 0.002 * label + decline), std::exp(-8.9 + 0.001 * label)};
    };
    std::vector<IdentifiedTheta> seq;
    for (int w = 1; w <= 104; ++w) seq.push_back({w, theta_at(w)});
    const SeasonalModel m = seasonal_fit(seq, 12);
    const ThetaForecast f = seasonal_predict(m, 109, 12);
    for (int h = 0; h < 12; ++h) {
      const CtrlTheta t = theta_at(109 + h);
      worst = std::max({worst, std::abs(f.values[h].rho_max / t.rho_max - 1.0),
                        std::abs(f.values[h].kappa / t.kappa - 1.0)});
    }
  }
  report("AC-7", worst <= 0.01, "one-quarter-ahead max rel err " + fmt("%.2e", worst));
}

void ac8_pairing() {
  // Determinism: two runs of the same config and seed serialize identically.
  ExperimentConfig c = load("drift_moderate.json");
  c.n_trials = 20;
  c.bootstrap_reps = 1000;
  auto serialize = [&](int jobs) {
    const auto trials = run_experiment(c, jobs);
    std::ostringstream out;
    write_trials_csv(out, trials);
    write_summary_csv(out, summarize(c, trials));
    write_traces_csv(out, trials);
    return out.str();
  };
  const bool identical = serialize(1) == serialize(4);

  ExperimentConfig bb = load("drift_mild.json");
  bb.controllers = {ControllerKind::kBaselinePacing, ControllerKind::kBaselinePacing};
  bb.n_trials = 50;
  int nonzero = 0;
  for (const auto& t : run_experiment(bb, 0)) {
    if (t.failed || improvement_pct(t.outcomes[1].total_return, t.outcomes[0].total_return) != 0.0) ++nonzero;
  }

  long checked = 0, broken = 0, unpaired = 0;
  for (const auto& t : g_all_trials) {
    if (!audit_pairing(t)) ++unpaired;
    for (const auto& o : t.outcomes) {
      for (std::size_t w = 0; w + 1 < o.trace.size(); ++w) {
        ++checked;
        if (o.remaining_before[w + 1] != o.remaining_before[w] - o.trace[w].realized_spend) ++broken;
      }
    }
  }
  report("AC-8", identical && nonzero == 0 && broken == 0 && unpaired == 0 && checked > 0,
         std::string("repeat run ") + (identical ? "byte-identical" : "DIFFERS") +
             "; baseline-vs-baseline nonzero trials " + std::to_string(nonzero) + "/50; accounting " +
             std::to_string(checked - broken) + "/" + std::to_string(checked) + " transitions exact; unpaired trials " +
             std::to_string(unpaired));
}

// Two-sided Student-t tail by Simpson integration of the density.
double two_sided_p(double t, double nu) {
  auto dens = [nu](double x) {
    const double c = std::tgamma(0.5 * (nu + 1.0)) / (std::sqrt(nu * M_PI) * std::tgamma(0.5 * nu));
    return c * std::pow(1.0 + x * x / nu, -0.5 * (nu + 1.0));
  };
  const int m = 20000;
  const double a = std::abs(t), h = a / m;
  double s = dens(0.0) + dens(a);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * dens(i * h);
  return 2.0 * (0.5 - s * h / 3.0);
}

void ac9_stats() {
  const PairedT r = paired_t(std::vector<double>{1.0, 2.0, 3.0});
  const double p_ref = two_sided_p(r.t_stat, 2.0);
  const bool t_ok = std::abs(r.t_stat - 3.4641) <= 5e-5 && std::abs(r.p_value - p_ref) <= 1e-3 &&
                    std::abs(r.p_value - 0.0742) <= 1e-3;
  const PairedT zero = paired_t(std::vector<double>(4, 0.0));
  const PairedT flat = paired_t(std::vector<double>(4, 1.5));
  const bool degenerate = zero.p_value == 1.0 && zero.ci95.lo == 0.0 && zero.ci95.hi == 0.0 && flat.p_value == 0.0 &&
                          flat.ci95.lo == 1.5 && flat.ci95.hi == 1.5;
  const Interval single = bootstrap_ci(std::vector<double>{2.75}, 1000, 1);
  const bool boot = single.lo == 2.75 && single.hi == 2.75;
  report("AC-9", t_ok && degenerate && boot,
         "t=" + fmt("%.4f", r.t_stat) + " p=" + fmt("%.5f", r.p_value) + " (integrated " + fmt("%.5f", p_ref) +
             "); degenerate conventions " + (degenerate ? "ok" : "wrong") + "; single-sample bootstrap " +
             (boot ? "ok" : "wrong"));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_config_dir = argv[1];
  const std::pair<const char*, void (*)()> checks[] = {
      {"AC-1", ac1_static_parity}, {"AC-2", ac2_drift}, {"AC-3", ac3_seasonal_sweep},
      {"AC-4", ac4_solver},        {"AC-5", ac5_identification}, {"AC-6", ac6_filter},
      {"AC-7", ac7_seasonal_forecaster}, {"AC-8", ac8_pairing}, {"AC-9", ac9_stats}};
  for (const auto& [id, fn] : checks) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of 9 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
