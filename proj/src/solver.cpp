#include "budgetlab/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include "json.hpp"
#include <stdexcept>
#include <string>

namespace budgetlab {

namespace {

constexpr double kTiny = 1e-300;

// Linear constraints A b <= c.
struct Rows {
  Eigen::MatrixXd A;
  Eigen::VectorXd c;
  std::vector<std::string> names;
};

Rows build_rows(const HorizonProblem& p) {
  const int H = p.horizon();
  const bool lower = p.bounds_active && p.lower_ratio > 0.0;
  const int m = 1 + H + (p.bounds_active ? H : 0) + (lower ? H : 0);
  Rows r{Eigen::MatrixXd::Zero(m, H), Eigen::VectorXd::Zero(m), {}};
  r.names.reserve(m);

  int i = 0;
  double offsets = 0.0;
  for (int h = 0; h < H; ++h) {
    r.A(i, h) = p.terms[h].spend_map.slope;
    offsets += p.terms[h].spend_map.offset;
  }
  r.c(i++) = p.budget_cap - offsets;
  r.names.emplace_back("budget");

  for (int h = 0; h < H; ++h) {
    r.A(i++, h) = -1.0;
    r.names.push_back("nonneg[" + std::to_string(h) + "]");
  }
  if (p.bounds_active) {
    for (int h = 0; h < H; ++h) {
      r.A(i, h) = 1.0;
      if (h == 0) {
        r.c(i) = p.upper_ratio * p.anchor;
      } else {
        r.A(i, h - 1) = -p.upper_ratio;
      }
      ++i;
      r.names.push_back("upper_ratio[" + std::to_string(h) + "]");
    }
  }
  if (lower) {
    for (int h = 0; h < H; ++h) {
      r.A(i, h) = -1.0;
      if (h == 0) {
        r.c(i) = -p.lower_ratio * p.anchor;
      } else {
        r.A(i, h - 1) = p.lower_ratio;
      }
      ++i;
      r.names.push_back("lower_ratio[" + std::to_string(h) + "]");
    }
  }
  return r;
}

struct Eval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd curv;  // diagonal Hessian with respect to b
};

Eval evaluate(const HorizonProblem& p, const Eigen::VectorXd& b, bool check_concavity) {
  const int H = p.horizon();
  Eval e{0.0, Eigen::VectorXd(H), Eigen::VectorXd(H)};
  for (int h = 0; h < H; ++h) {
    const SpendMap& sm = p.terms[h].spend_map;
    const double s = std::max(0.0, sm(b(h)));
    const CurvePoint cp = p.terms[h].response(s);
    if (check_concavity && !p.allow_nonconcave &&
        cp.curvature > 1e-12 * std::abs(cp.slope) / std::max(s, 1e-12)) {
      throw NonConcaveError("response of week " + std::to_string(h) +
                            " has positive curvature at spend " + std::to_string(s));
    }
    e.value += cp.value;
    e.grad(h) = sm.slope * cp.slope;
    e.curv(h) = sm.slope * sm.slope * cp.curvature;
  }
  return e;
}

double barrier_value(const HorizonProblem& p, const Rows& rows, const Eigen::VectorXd& b, double mu) {
  const Eigen::VectorXd s = rows.c - rows.A * b;
  if (s.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
  double v = -evaluate(p, b, false).value;
  for (int i = 0; i < s.size(); ++i) v -= mu * std::log(s(i));
  return v;
}

double lower_path_total(const HorizonProblem& p, double r) {
  double total = 0.0;
  double b = p.anchor;
  for (const auto& t : p.terms) {
    b *= r;
    total += t.spend_map.slope * b;
  }
  return total;
}

std::vector<double> geometric_path(const HorizonProblem& p, double r) {
  std::vector<double> out;
  double b = p.anchor;
  for (int h = 0; h < p.horizon(); ++h) {
    b *= r;
    out.push_back(b);
  }
  return out;
}

struct BarrierResult {
  Eigen::VectorXd b;
  int steps = 0;
  bool exhausted = false;
  double mu = 0.0;
};

BarrierResult barrier_solve(const HorizonProblem& p, const Rows& rows, Eigen::VectorXd b,
                            const SolverOptions& opt) {
  const int H = p.horizon();
  const int m = static_cast<int>(rows.c.size());
  const Eval e0 = evaluate(p, b, true);
  const double b_scale = std::max(b.cwiseAbs().maxCoeff(), kTiny);
  const double f_scale = std::max({std::abs(e0.value), e0.grad.cwiseAbs().maxCoeff() * b_scale, kTiny});

  BarrierResult res;
  double mu = 0.1 * f_scale / m;
  for (int outer = 0; outer < opt.outer_iterations; ++outer) {
    if (outer > 0) mu *= opt.barrier_factor;
    for (;;) {
      if (res.steps >= opt.max_newton_steps) {
        res.exhausted = true;
        break;
      }
      const Eval e = evaluate(p, b, true);
      const Eigen::VectorXd s = rows.c - rows.A * b;
      const Eigen::VectorXd inv_s = s.cwiseInverse();
      const Eigen::VectorXd g = -e.grad + mu * rows.A.transpose() * inv_s;
      Eigen::MatrixXd Hm = mu * rows.A.transpose() * inv_s.cwiseAbs2().asDiagonal() * rows.A;
      for (int h = 0; h < H; ++h) Hm(h, h) += std::max(0.0, -e.curv(h));
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hm);
      Eigen::VectorXd d = -ldlt.solve(g);
      if (!d.allFinite()) break;
      const double dec = -g.dot(d);
      if (!(dec > 1e-13 * f_scale)) break;

      const Eigen::VectorXd ad = rows.A * d;
      double t = 1.0;
      for (int i = 0; i < m; ++i) {
        if (ad(i) > 0.0) t = std::min(t, 0.99 * s(i) / ad(i));
      }
      const double phi0 = barrier_value(p, rows, b, mu);
      int backtracks = 0;
      while (barrier_value(p, rows, b + t * d, mu) > phi0 - 0.25 * t * dec && backtracks < 60) {
        t *= 0.5;
        ++backtracks;
      }
      ++res.steps;
      if (backtracks == 60) break;
      b += t * d;
    }
    if (res.exhausted) break;
  }
  res.b = std::move(b);
  res.mu = mu;
  return res;
}

// Newton iterations on the equality-constrained problem given by a working
// set of active rows, adding blocking rows and dropping rows with negative
// multipliers until the working set is consistent.
bool active_set_polish(const HorizonProblem& p, const Rows& rows, std::vector<int> active,
                       Eigen::VectorXd& b) {
  const int H = p.horizon();
  const int m = static_cast<int>(rows.c.size());
  const Eval e0 = evaluate(p, b, false);
  const double b_scale = std::max(b.cwiseAbs().maxCoeff(), kTiny);
  const double g_scale = std::max({e0.grad.cwiseAbs().maxCoeff(), std::abs(e0.value) / b_scale, kTiny});

  for (int round = 0; round < 4 * m + 10; ++round) {
    const int k = static_cast<int>(active.size());
    Eigen::VectorXd lambda;
    bool converged = false;
    bool blocked = false;
    for (int inner = 0; inner < 40; ++inner) {
      const Eval e = evaluate(p, b, false);
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(H + k, H + k);
      Eigen::VectorXd rhs(H + k);
      for (int h = 0; h < H; ++h) K(h, h) = std::min(0.0, e.curv(h));
      rhs.head(H) = -e.grad;
      for (int j = 0; j < k; ++j) {
        const int row = active[j];
        K.block(0, H + j, H, 1) = -rows.A.row(row).transpose();
        K.block(H + j, 0, 1, H) = rows.A.row(row);
        rhs(H + j) = rows.c(row) - rows.A.row(row).dot(b);
      }
      const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
      if (!sol.allFinite()) return false;
      const Eigen::VectorXd d = sol.head(H);
      lambda = sol.tail(k);

      double t = 1.0;
      int block = -1;
      const Eigen::VectorXd ad = rows.A * d;
      const Eigen::VectorXd slack = rows.c - rows.A * b;
      for (int i = 0; i < m; ++i) {
        if (std::find(active.begin(), active.end(), i) != active.end()) continue;
        if (ad(i) > 0.0 && slack(i) < t * ad(i)) {
          t = std::max(0.0, slack(i) / ad(i));
          block = i;
        }
      }
      b += t * d;
      if (block >= 0) {
        active.push_back(block);
        blocked = true;
        break;
      }
      if (d.cwiseAbs().maxCoeff() <= 1e-13 * b_scale) {
        converged = true;
        break;
      }
    }
    if (blocked) continue;
    if (!converged) return false;
    if (k == 0) return true;
    int worst = -1;
    double most_negative = -1e-10 * g_scale;
    for (int j = 0; j < k; ++j) {
      if (lambda(j) < most_negative) {
        most_negative = lambda(j);
        worst = j;
      }
    }
    if (worst < 0) return true;
    active.erase(active.begin() + worst);
  }
  return false;
}

HorizonSolution finish(const HorizonProblem& p, std::vector<double> budgets, SolveStatus status,
                       bool relaxed, int steps) {
  HorizonSolution sol;
  for (double& b : budgets) b = std::max(b, 0.0);
  sol.budgets = std::move(budgets);
  sol.objective = horizon_objective(p, sol.budgets);
  try {
    sol.kkt_residual = kkt_residual(p, sol.budgets);
  } catch (const InfeasibleCandidateError&) {
    sol.kkt_residual = std::numeric_limits<double>::quiet_NaN();
    status = SolveStatus::kRelaxedFeasible;
  }
  sol.status = relaxed ? SolveStatus::kRelaxedFeasible : status;
  sol.lower_bounds_relaxed = relaxed;
  sol.newton_steps = steps;
  return sol;
}

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kMaxIter:
      return "max_iter";
    case SolveStatus::kRelaxedFeasible:
      return "relaxed_feasible";
  }
  return "unknown";
}

ResponseFn exp_saturation_fn(const CtrlTheta& theta) {
  theta.validate();
  return [theta](double s) {
    const double e = std::exp(-theta.kappa * s);
    return CurvePoint{theta.rho_max * -std::expm1(-theta.kappa * s), theta.rho_max * theta.kappa * e,
                      -theta.rho_max * theta.kappa * theta.kappa * e};
  };
}

void HorizonProblem::validate() const {
  if (terms.empty()) throw std::invalid_argument("HorizonProblem: horizon must be >= 1");
  if (!(budget_cap >= 0.0) || !std::isfinite(budget_cap)) {
    throw std::invalid_argument("HorizonProblem: budget_cap must be finite and >= 0");
  }
  if (!(anchor >= 0.0) || !std::isfinite(anchor)) {
    throw std::invalid_argument("HorizonProblem: anchor must be finite and >= 0");
  }
  if (!(lower_ratio >= 0.0 && lower_ratio <= 1.0 && upper_ratio >= 1.0 && std::isfinite(upper_ratio))) {
    throw std::invalid_argument("HorizonProblem: need 0 <= lower_ratio <= 1 <= upper_ratio");
  }
  for (const auto& t : terms) {
    if (!t.response) throw std::invalid_argument("HorizonProblem: missing response function");
    if (!(t.spend_map.slope > 0.0) || !(t.spend_map.offset >= 0.0)) {
      throw std::invalid_argument("HorizonProblem: spend map needs slope > 0 and offset >= 0");
    }
  }
}

HorizonProblem relax_lower_bounds(const HorizonProblem& problem) {
  HorizonProblem out = problem;
  out.lower_ratio = 0.0;
  return out;
}

double horizon_objective(const HorizonProblem& problem, std::span<const double> budgets) {
  double total = 0.0;
  for (int h = 0; h < problem.horizon(); ++h) {
    total += problem.terms[h].response(std::max(0.0, problem.terms[h].spend_map(budgets[h]))).value;
  }
  return total;
}

HorizonSolution solve_horizon(const HorizonProblem& problem, const SolverOptions& options) {
  problem.validate();
  const int H = problem.horizon();
  HorizonProblem p = problem;

  double net_cap = p.budget_cap;
  double slope_sum = 0.0;
  for (const auto& t : p.terms) {
    net_cap -= t.spend_map.offset;
    slope_sum += t.spend_map.slope;
  }

  // Degenerate inputs with a single feasible point.
  if (p.bounds_active && p.anchor == 0.0) {
    return finish(p, std::vector<double>(H, 0.0), SolveStatus::kOptimal, false, 0);
  }
  if (net_cap <= 0.0) {
    const bool relax = p.bounds_active && p.lower_ratio > 0.0;
    if (relax) p = relax_lower_bounds(p);
    return finish(p, std::vector<double>(H, 0.0), SolveStatus::kOptimal, relax, 0);
  }

  bool relaxed = false;
  Eigen::VectorXd b0(H);
  if (!p.bounds_active) {
    b0.setConstant(0.5 * net_cap / slope_sum);
  } else {
    if (p.lower_ratio > 0.0) {
      const double need = lower_path_total(p, p.lower_ratio);
      if (need > net_cap * (1.0 + 1e-12)) {
        p = relax_lower_bounds(p);
        relaxed = true;
      } else if (need >= net_cap * (1.0 - 1e-12)) {
        return finish(p, geometric_path(p, p.lower_ratio), SolveStatus::kOptimal, false, 0);
      }
    }
    if (p.upper_ratio - p.lower_ratio <= 1e-12) {
      return finish(p, geometric_path(p, p.upper_ratio), SolveStatus::kOptimal, relaxed, 0);
    }
    double r_hi = p.upper_ratio;
    if (lower_path_total(p, r_hi) >= net_cap) {
      double lo = p.lower_ratio;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + r_hi);
        (lower_path_total(p, mid) < net_cap ? lo : r_hi) = mid;
      }
    }
    const double r = p.lower_ratio + 0.5 * (r_hi - p.lower_ratio);
    const auto path = geometric_path(p, r);
    for (int h = 0; h < H; ++h) b0(h) = path[h];
  }

  const Rows rows = build_rows(p);
  BarrierResult br = barrier_solve(p, rows, b0, options);
  std::vector<double> best(br.b.data(), br.b.data() + H);
  double best_kkt = std::numeric_limits<double>::infinity();
  try {
    best_kkt = kkt_residual(p, best);
  } catch (const InfeasibleCandidateError&) {
  }

  if (options.polish) {
    const Eigen::VectorXd s = rows.c - rows.A * br.b;
    const Eval e = evaluate(p, br.b, false);
    const double b_scale = std::max(br.b.cwiseAbs().maxCoeff(), kTiny);
    const double f_scale = std::max({std::abs(e.value), e.grad.cwiseAbs().maxCoeff() * b_scale, kTiny});
    std::vector<int> active;
    for (int i = 0; i < s.size(); ++i) {
      if (s(i) * s(i) < br.mu * b_scale * b_scale / f_scale) active.push_back(i);
    }
    Eigen::VectorXd bp = br.b;
    if (active_set_polish(p, rows, active, bp)) {
      std::vector<double> cand(bp.data(), bp.data() + H);
      for (double& v : cand) v = std::max(v, 0.0);
      try {
        const double k = kkt_residual(p, cand);
        const double f_best = horizon_objective(p, best);
        const double f_cand = horizon_objective(p, cand);
        if (k <= best_kkt && f_cand >= f_best - 1e-9 * f_scale) {
          best = std::move(cand);
          best_kkt = k;
        }
      } catch (const InfeasibleCandidateError&) {
      }
    }
  }

  const SolveStatus status = best_kkt <= options.kkt_tol ? SolveStatus::kOptimal : SolveStatus::kMaxIter;
  return finish(p, std::move(best), status, relaxed, br.steps);
}

double kkt_residual(const HorizonProblem& problem, std::span<const double> candidate) {
  problem.validate();
  const int H = problem.horizon();
  if (static_cast<int>(candidate.size()) != H) {
    throw std::invalid_argument("kkt_residual: candidate length differs from horizon");
  }
  const Rows rows = build_rows(problem);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(candidate.data(), H);
  const int m = static_cast<int>(rows.c.size());

  std::vector<ConstraintViolation> violations;
  Eigen::VectorXd slack(m);
  for (int i = 0; i < m; ++i) {
    const double ab = rows.A.row(i).dot(b);
    const double scale = std::max(std::abs(rows.c(i)), rows.A.row(i).cwiseAbs().dot(b.cwiseAbs()));
    slack(i) = rows.c(i) - ab;
    if (-slack(i) > 1e-6 * scale) violations.push_back({rows.names[i], -slack(i)});
  }
  if (!violations.empty()) {
    std::string msg = "infeasible candidate:";
    for (const auto& v : violations) msg += " " + v.constraint + " by " + std::to_string(v.amount);
    throw InfeasibleCandidateError(msg, std::move(violations));
  }

  const Eval e = evaluate(problem, b, false);
  const double b_norm = std::max(b.cwiseAbs().maxCoeff(), kTiny);
  const double g_scale = std::max({e.grad.cwiseAbs().maxCoeff(), std::abs(e.value) / b_norm, kTiny});

  std::vector<int> active;
  for (int i = 0; i < m; ++i) {
    if (slack(i) <= 1e-6 * b_norm * rows.A.row(i).cwiseAbs().maxCoeff()) active.push_back(i);
  }
  Eigen::MatrixXd At(H, active.size());
  for (std::size_t j = 0; j < active.size(); ++j) At.col(j) = rows.A.row(active[j]).transpose();

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(active.size());
  if (!active.empty()) lambda = At.completeOrthogonalDecomposition().solve(e.grad);
  const Eigen::VectorXd r = e.grad - At * lambda;

  double stationarity = r.cwiseAbs().maxCoeff() / g_scale;
  double dual = 0.0;
  double complementarity = 0.0;
  for (std::size_t j = 0; j < active.size(); ++j) {
    dual = std::max(dual, -lambda(j) / g_scale);
    complementarity =
        std::max(complementarity, std::abs(lambda(j)) * std::max(slack(active[j]), 0.0) / (g_scale * b_norm));
  }
  return std::max({stationarity, dual, complementarity});
}

std::string horizon_dump_json(const HorizonProblem& problem, const HorizonSolution& solution) {
  nlohmann::json j;
  j["horizon"] = problem.horizon();
  j["budget_cap"] = problem.budget_cap;
  j["anchor"] = problem.anchor;
  j["lower_ratio"] = problem.lower_ratio;
  j["upper_ratio"] = problem.upper_ratio;
  j["bounds_active"] = problem.bounds_active;
  j["allow_nonconcave"] = problem.allow_nonconcave;
  auto& weeks = j["weeks"] = nlohmann::json::array();
  for (int h = 0; h < problem.horizon(); ++h) {
    const auto& t = problem.terms[h];
    const double b = h < static_cast<int>(solution.budgets.size()) ? solution.budgets[h] : 0.0;
    const double s = std::max(0.0, t.spend_map(b));
    const CurvePoint cp = t.response(s);
    weeks.push_back({{"budget", b},
                     {"spend_slope", t.spend_map.slope},
                     {"spend_offset", t.spend_map.offset},
                     {"predicted_spend", s},
                     {"value", cp.value},
                     {"marginal", cp.slope},
                     {"curvature", cp.curvature}});
  }
  j["objective"] = solution.objective;
  j["kkt_residual"] = solution.kkt_residual;
  j["status"] = to_string(solution.status);
  j["newton_steps"] = solution.newton_steps;
  j["lower_bounds_relaxed"] = solution.lower_bounds_relaxed;
  return j.dump(2);
}

}  // namespace budgetlab
