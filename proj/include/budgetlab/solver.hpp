#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "budgetlab/error.hpp"
#include "budgetlab/response.hpp"

namespace budgetlab {

struct CurvePoint {
  double value = 0.0;
  double slope = 0.0;
  double curvature = 0.0;
};

// Return of one week as a function of that week's (predicted) spend.
using ResponseFn = std::function<CurvePoint(double spend)>;

ResponseFn exp_saturation_fn(const CtrlTheta& theta);

// Predicted spend s = slope * b + offset for planned budget b.
struct SpendMap {
  double slope = 1.0;
  double offset = 0.0;

  double operator()(double b) const { return slope * b + offset; }
};

struct HorizonTerm {
  ResponseFn response;
  SpendMap spend_map;
};

// maximize   sum_h f_h(s_h(b_h))
// subject to sum_h s_h(b_h) <= budget_cap, b >= 0 and, when bounds_active,
//            lower_ratio * b_{h-1} <= b_h <= upper_ratio * b_{h-1}, b_{-1} = anchor.
struct HorizonProblem {
  std::vector<HorizonTerm> terms;
  double budget_cap = 0.0;
  double anchor = 0.0;
  double lower_ratio = 0.7;
  double upper_ratio = 1.3;
  bool bounds_active = true;
  // Accept response functions with positive curvature (the Richards oracle);
  // the Newton model then uses the curvature clamped at 0.
  bool allow_nonconcave = false;

  int horizon() const { return static_cast<int>(terms.size()); }
  void validate() const;
};

enum class SolveStatus { kOptimal, kMaxIter, kRelaxedFeasible };

const char* to_string(SolveStatus status);

struct HorizonSolution {
  std::vector<double> budgets;
  double objective = 0.0;
  double kkt_residual = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
  int newton_steps = 0;
  bool lower_bounds_relaxed = false;
};

struct SolverOptions {
  int outer_iterations = 8;
  double barrier_factor = 0.2;
  int max_newton_steps = 200;
  double kkt_tol = 1e-6;
  bool polish = true;
};

HorizonSolution solve_horizon(const HorizonProblem& problem, const SolverOptions& options = {});

// Copy of `problem` with the lower ratio bounds dropped.
HorizonProblem relax_lower_bounds(const HorizonProblem& problem);

struct ConstraintViolation {
  std::string constraint;  // e.g. "budget", "upper_ratio[3]"
  double amount = 0.0;     // a.b - c > 0
};

class InfeasibleCandidateError : public InfeasibleError {
 public:
  InfeasibleCandidateError(const std::string& message, std::vector<ConstraintViolation> violations)
      : InfeasibleError(message), violations_(std::move(violations)) {}

  const std::vector<ConstraintViolation>& violations() const { return violations_; }

 private:
  std::vector<ConstraintViolation> violations_;
};

// Max of scaled stationarity, dual infeasibility and complementarity, with
// multipliers from a least-squares fit on the near-active constraints.
// Throws InfeasibleCandidateError when a constraint is violated by more than
// 1e-6 relative.
double kkt_residual(const HorizonProblem& problem, std::span<const double> candidate);

double horizon_objective(const HorizonProblem& problem, std::span<const double> budgets);

// Problem summary and solution as a JSON document (debug dumps).
std::string horizon_dump_json(const HorizonProblem& problem, const HorizonSolution& solution);

}  // namespace budgetlab
