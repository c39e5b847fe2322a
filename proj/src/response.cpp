#include "budgetlab/response.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "budgetlab/error.hpp"

namespace budgetlab {

namespace {

constexpr double kKappaMin = 1e-8;
constexpr double kKappaMax = 1.0;

void check_spend(double spend, const char* where) {
  if (!std::isfinite(spend) || spend < 0.0) {
    throw DomainError(std::string(where) + ": spend must be finite and >= 0, got " +
                      std::to_string(spend));
  }
}

struct Bounds {
  double log_rho_lo, log_rho_hi, log_kappa_lo, log_kappa_hi;

  double clamp_rho(double v) const { return std::clamp(v, log_rho_lo, log_rho_hi); }
  double clamp_kappa(double v) const { return std::clamp(v, log_kappa_lo, log_kappa_hi); }
};

double sse_at(std::span<const SpendReturn> obs, double log_rho, double log_kappa) {
  const double rho = std::exp(log_rho);
  const double kappa = std::exp(log_kappa);
  double sse = 0.0;
  for (const auto& o : obs) {
    const double e = o.ret - rho * -std::expm1(-kappa * o.spend);
    sse += e * e;
  }
  return sse;
}

struct LmRun {
  double log_rho = 0.0;
  double log_kappa = 0.0;
  double sse = std::numeric_limits<double>::infinity();
  double grad = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool stalled = false;
};

// Levenberg-Marquardt on p = (log rho_max, log kappa) with box clamping.
LmRun levenberg_marquardt(std::span<const SpendReturn> obs, double log_rho, double log_kappa,
                          const Bounds& bounds, double sum_r2, const FitOptions& opt) {
  LmRun run;
  run.log_rho = bounds.clamp_rho(log_rho);
  run.log_kappa = bounds.clamp_kappa(log_kappa);
  run.sse = sse_at(obs, run.log_rho, run.log_kappa);
  double damping = 1e-3;

  for (int it = 0; it < opt.max_iterations; ++it) {
    const double rho = std::exp(run.log_rho);
    const double kappa = std::exp(run.log_kappa);
    double a11 = 0, a12 = 0, a22 = 0, g1 = 0, g2 = 0;
    for (const auto& o : obs) {
      const double ex = std::exp(-kappa * o.spend);
      const double u = -std::expm1(-kappa * o.spend);
      const double j1 = rho * u;
      const double j2 = rho * kappa * o.spend * ex;
      const double e = o.ret - rho * u;
      a11 += j1 * j1;
      a12 += j1 * j2;
      a22 += j2 * j2;
      g1 += j1 * e;
      g2 += j2 * e;
    }
    // Projected gradient: components pushing against an active bound do not
    // count, so a fit pinned at a bound can still be a converged optimum.
    const double p1 = (run.log_rho >= bounds.log_rho_hi && g1 > 0.0) ||
                              (run.log_rho <= bounds.log_rho_lo && g1 < 0.0)
                          ? 0.0
                          : g1;
    const double p2 = (run.log_kappa >= bounds.log_kappa_hi && g2 > 0.0) ||
                              (run.log_kappa <= bounds.log_kappa_lo && g2 < 0.0)
                          ? 0.0
                          : g2;
    run.grad = 2.0 * std::max(std::abs(p1), std::abs(p2)) / sum_r2;
    run.iterations = it;
    if (run.grad <= opt.gradient_tol) break;

    bool accepted = false;
    while (damping < 1e16) {
      const double m11 = a11 * (1.0 + damping) + 1e-300;
      const double m22 = a22 * (1.0 + damping) + 1e-300;
      const double det = m11 * m22 - a12 * a12;
      if (det > 0.0) {
        double d1 = (m22 * g1 - a12 * g2) / det;
        double d2 = (m11 * g2 - a12 * g1) / det;
        // A coordinate on a bound that the step would push through stays
        // fixed; the other one takes the reduced step.
        const bool fix_rho = (run.log_rho >= bounds.log_rho_hi && d1 > 0.0) ||
                             (run.log_rho <= bounds.log_rho_lo && d1 < 0.0);
        const bool fix_kappa = (run.log_kappa >= bounds.log_kappa_hi && d2 > 0.0) ||
                               (run.log_kappa <= bounds.log_kappa_lo && d2 < 0.0);
        if (fix_rho && !fix_kappa) {
          d1 = 0.0;
          d2 = g2 / m22;
        } else if (fix_kappa && !fix_rho) {
          d1 = g1 / m11;
          d2 = 0.0;
        }
        const double nr = bounds.clamp_rho(run.log_rho + d1);
        const double nk = bounds.clamp_kappa(run.log_kappa + d2);
        const double s = sse_at(obs, nr, nk);
        if (s < run.sse) {
          const bool moved = nr != run.log_rho || nk != run.log_kappa;
          run.log_rho = nr;
          run.log_kappa = nk;
          run.sse = s;
          damping = std::max(damping / 3.0, 1e-12);
          accepted = moved;
          break;
        }
      }
      damping *= 4.0;
    }
    if (!accepted) {  // no descent direction left at working precision
      run.stalled = true;
      break;
    }
  }
  return run;
}

}  // namespace

void CtrlTheta::validate() const {
  if (!(std::isfinite(rho_max) && rho_max > 0.0 && std::isfinite(kappa) && kappa > 0.0)) {
    throw std::invalid_argument("CtrlTheta fields must be positive and finite");
  }
}

double exp_saturation(double spend, const CtrlTheta& theta) {
  check_spend(spend, "exp_saturation");
  return theta.rho_max * -std::expm1(-theta.kappa * spend);
}

double exp_saturation_slope(double spend, const CtrlTheta& theta) {
  return theta.rho_max * theta.kappa * std::exp(-theta.kappa * spend);
}

double exp_saturation_curvature(double spend, const CtrlTheta& theta) {
  return -theta.rho_max * theta.kappa * theta.kappa * std::exp(-theta.kappa * spend);
}

std::array<double, 2> exp_saturation_jacobian(double spend, const CtrlTheta& theta) {
  return {-std::expm1(-theta.kappa * spend),
          theta.rho_max * spend * std::exp(-theta.kappa * spend)};
}

double saturation_spend(double eta, const CtrlTheta& theta) {
  if (!(eta > 0.0 && eta < 1.0)) {
    throw DomainError("saturation_spend: eta must lie in (0, 1), got " + std::to_string(eta));
  }
  return -std::log1p(-eta) / theta.kappa;
}

FitResult fit_exp_saturation(std::span<const SpendReturn> obs, const FitOptions& options) {
  if (obs.size() < 3) throw std::invalid_argument("fit_exp_saturation: need at least 3 observations");
  double max_r = -std::numeric_limits<double>::infinity();
  double mean_s = 0.0, mean_r = 0.0, sum_r2 = 0.0;
  double s_min = std::numeric_limits<double>::infinity();
  double s_max = -std::numeric_limits<double>::infinity();
  for (const auto& o : obs) {
    check_spend(o.spend, "fit_exp_saturation");
    if (!std::isfinite(o.ret)) throw DomainError("fit_exp_saturation: non-finite return");
    max_r = std::max(max_r, o.ret);
    s_min = std::min(s_min, o.spend);
    s_max = std::max(s_max, o.spend);
    mean_s += o.spend;
    mean_r += o.ret;
    sum_r2 += o.ret * o.ret;
  }
  mean_s /= static_cast<double>(obs.size());
  mean_r /= static_cast<double>(obs.size());
  if (!(s_max > s_min)) {
    throw NonIdentifiableError("fit_exp_saturation: all spends identical");
  }
  if (!(max_r > 0.0) || !(mean_r > 0.0)) {
    throw NonIdentifiableError("fit_exp_saturation: returns carry no positive signal");
  }

  const Bounds bounds{std::log(max_r * 1e-9), std::log(100.0 * max_r), std::log(kKappaMin),
                      std::log(kKappaMax)};
  const double rho0 = 1.2 * max_r;
  const double kappa0 = std::clamp(-std::log1p(-mean_r / rho0) / mean_s, kKappaMin, kKappaMax);

  // Least-squares rho for a fixed kappa.
  auto rho_given_kappa = [&](double kappa) {
    double num = 0.0, den = 0.0;
    for (const auto& o : obs) {
      const double u = -std::expm1(-kappa * o.spend);
      num += o.ret * u;
      den += u * u;
    }
    return den > 0.0 && num > 0.0 ? num / den : rho0;
  };

  LmRun best = levenberg_marquardt(obs, std::log(rho0), std::log(kappa0), bounds, sum_r2, options);
  int total_iterations = best.iterations;
  if (options.multi_start) {
    for (double factor : {1.0 / 9.0, 1.0 / 3.0, 3.0, 9.0, 27.0}) {
      const double kappa = std::clamp(kappa0 * factor, kKappaMin, kKappaMax);
      LmRun run = levenberg_marquardt(obs, std::log(rho_given_kappa(kappa)), std::log(kappa),
                                      bounds, sum_r2, options);
      total_iterations += run.iterations;
      if (run.sse < best.sse) best = run;
    }
    // Near-linear data: the optimum sits on the rho bound, which the interior
    // starts only reach by crawling along the rho*kappa = const valley.
    double sr = 0.0, ss = 0.0;
    for (const auto& o : obs) {
      sr += o.spend * o.ret;
      ss += o.spend * o.spend;
    }
    if (sr > 0.0 && ss > 0.0) {
      const double kappa = std::clamp(sr / ss / std::exp(bounds.log_rho_hi), kKappaMin, kKappaMax);
      LmRun run = levenberg_marquardt(obs, bounds.log_rho_hi, std::log(kappa), bounds, sum_r2, options);
      total_iterations += run.iterations;
      if (run.sse < best.sse) best = run;
    }
  }

  FitResult result;
  result.theta = {std::exp(best.log_rho), std::exp(best.log_kappa)};
  result.residual_sse = best.sse;
  result.iterations = total_iterations;
  result.gradient_norm = best.grad;
  result.converged = best.grad <= options.gradient_tol ||
                     (best.stalled && best.grad <= options.stall_gradient_tol);
  return result;
}

std::vector<SpendReturn> weekly_observations(const HistoryDataset& history, int first_week,
                                             int count) {
  const int n = history.num_weeks();
  const int end = count < 0 ? n : std::min(n, first_week + count);
  std::vector<SpendReturn> out;
  for (int i = std::max(0, first_week); i < end; ++i) {
    out.push_back({history.weekly[i].spend, history.weekly[i].ret});
  }
  return out;
}

CtrlTheta daily_to_weekly(const CtrlTheta& daily) {
  return {daily.rho_max * kDaysPerWeek, daily.kappa / kDaysPerWeek};
}

namespace {

struct Window {
  int label = 0;
  std::vector<SpendReturn> obs;
};

// Least-squares rho_max for a fixed kappa, and the largest return seen.
std::pair<double, double> amplitude_given_kappa(std::span<const SpendReturn> obs, double kappa) {
  double ru = 0.0, uu = 0.0, max_r = 0.0;
  for (const auto& o : obs) {
    const double u = -std::expm1(-kappa * o.spend);
    ru += o.ret * u;
    uu += u * u;
    max_r = std::max(max_r, o.ret);
  }
  return {uu > 0.0 ? ru / uu : std::numeric_limits<double>::quiet_NaN(), max_r};
}

double profile_sse(const std::vector<Window>& windows, double log_kappa) {
  const double kappa = std::exp(log_kappa);
  double total = 0.0;
  for (const auto& w : windows) {
    double ru = 0.0, uu = 0.0, rr = 0.0;
    for (const auto& o : w.obs) {
      const double u = -std::expm1(-kappa * o.spend);
      ru += o.ret * u;
      uu += u * u;
      rr += o.ret * o.ret;
    }
    total += uu > 0.0 ? rr - ru * ru / uu : rr;
  }
  return total;
}

// Grid over the kappa bounds, then Brent inside the best bracket.
double shared_log_kappa(const std::vector<Window>& windows) {
  constexpr int kGrid = 97;
  const double lo = std::log(kKappaMin);
  const double hi = std::log(kKappaMax);
  const double step = (hi - lo) / (kGrid - 1);
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double v = profile_sse(windows, lo + step * i);
    if (v < best_sse) {
      best_sse = v;
      best = i;
    }
  }
  const double a = lo + step * std::max(0, best - 1);
  const double b = lo + step * std::min(kGrid - 1, best + 1);
  const auto [x, fx] = boost::math::tools::brent_find_minima(
      [&](double v) { return profile_sse(windows, v); }, a, b, 52);
  return fx <= best_sse ? x : lo + step * best;
}

}  // namespace

RollingIdentification rolling_identify(const HistoryDataset& history, const RollingOptions& options) {
  if (options.window_weeks < 3) throw std::invalid_argument("rolling_identify: window_weeks must be >= 3");
  const int n = history.num_weeks();
  if (n < options.window_weeks) throw std::invalid_argument("rolling_identify: history shorter than window");

  RollingIdentification out;
  std::vector<Window> windows;
  const int half = options.window_weeks / 2;
  for (int i = 0; i < n; ++i) {
    const int label = history.first_week_label + i;
    int lo = 0;
    int hi = n - 1;
    if (options.window_weeks < n) {
      lo = std::max(0, i - half);
      hi = std::min(n - 1, i + (options.window_weeks - 1 - half));
    }
    if (options.segment_weeks > 0) {
      const int seg_start_label = ((label - 1) / options.segment_weeks) * options.segment_weeks + 1;
      const int seg_lo = i - (label - seg_start_label);
      lo = std::max(lo, seg_lo);
      hi = std::min(hi, seg_lo + options.segment_weeks - 1);
    }

    std::vector<SpendReturn> obs;
    if (options.daily) {
      for (int d = lo * kDaysPerWeek; d < (hi + 1) * kDaysPerWeek; ++d) {
        obs.push_back({history.daily_spend[d], history.daily_return[d]});
      }
    } else {
      obs = weekly_observations(history, lo, hi - lo + 1);
    }
    windows.push_back({label, std::move(obs)});
  }

  const auto emit = [&](int label, const CtrlTheta& theta) {
    out.thetas.push_back({label, options.daily ? daily_to_weekly(theta) : theta});
  };

  if (!options.shared_curvature) {
    for (const auto& [label, obs] : windows) {
      try {
        const FitResult fit = fit_exp_saturation(obs);
        if (!fit.converged) {
          out.skipped_weeks.push_back(label);
          continue;
        }
        emit(label, fit.theta);
      } catch (const std::exception&) {
        out.skipped_weeks.push_back(label);
      }
    }
    return out;
  }

  const double log_kappa = shared_log_kappa(windows);
  const double kappa = std::exp(log_kappa);
  for (const auto& [label, obs] : windows) {
    const auto [rho, max_r] = amplitude_given_kappa(obs, kappa);
    if (!(std::isfinite(rho) && rho > 0.0 && rho <= 100.0 * max_r)) {
      out.skipped_weeks.push_back(label);
      continue;
    }
    emit(label, {rho, kappa});
  }
  return out;
}

void write_identified_csv(std::span<const IdentifiedTheta> thetas, std::ostream& out) {
  out << "week,rho_max,kappa\n" << std::setprecision(12);
  for (const auto& t : thetas) out << t.week_label << ',' << t.theta.rho_max << ',' << t.theta.kappa << '\n';
}

}  // namespace budgetlab
