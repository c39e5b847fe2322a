#include "budgetlab/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace budgetlab {

PairedT paired_t(std::span<const double> diffs) {
  const int n = static_cast<int>(diffs.size());
  if (n < 2) throw std::invalid_argument("paired_t needs at least 2 differences");
  PairedT r;
  r.n = n;
  double sum = 0.0;
  for (double d : diffs) sum += d;
  r.mean = sum / n;
  double ss = 0.0;
  for (double d : diffs) ss += (d - r.mean) * (d - r.mean);
  r.sd = std::sqrt(ss / (n - 1));
  const double se = r.sd / std::sqrt(static_cast<double>(n));

  if (se == 0.0) {
    r.ci95 = {r.mean, r.mean};
    if (r.mean == 0.0) {
      r.t_stat = 0.0;
      r.p_value = 1.0;
    } else {
      r.t_stat = std::copysign(std::numeric_limits<double>::infinity(), r.mean);
      r.p_value = 0.0;
    }
    return r;
  }

  const boost::math::students_t dist(n - 1);
  r.t_stat = r.mean / se;
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_stat)));
  const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
  r.ci95 = {r.mean - q * se, r.mean + q * se};
  return r;
}

Interval bootstrap_ci(std::span<const double> diffs, int b_reps, std::uint64_t seed) {
  const std::size_t n = diffs.size();
  if (n < 1) throw std::invalid_argument("bootstrap_ci needs at least 1 value");
  if (b_reps < 100) throw std::invalid_argument("bootstrap_ci needs at least 100 replicates");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(b_reps);
  for (int b = 0; b < b_reps; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += diffs[pick(rng)];
    means[b] = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  // Linear interpolation between order statistics.
  auto quantile = [&](double q) {
    const double pos = q * (b_reps - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - static_cast<double>(i);
    if (i + 1 >= means.size()) return means.back();
    return means[i] + f * (means[i + 1] - means[i]);
  };
  return {quantile(0.025), quantile(0.975)};
}

double normalized_return(double policy_return, double oracle_return) {
  if (!(oracle_return > 0.0)) throw std::domain_error("normalized_return: oracle return must be positive");
  return policy_return / oracle_return;
}

double improvement_pct(double policy, double base) {
  if (!(base > 0.0)) throw std::domain_error("improvement_pct: base return must be positive");
  return 100.0 * (policy - base) / base;
}

double oracle_gap_pct(double oracle, double policy) {
  if (!(oracle > 0.0)) throw std::domain_error("oracle_gap_pct: oracle return must be positive");
  return 100.0 * (oracle - policy) / oracle;
}

}  // namespace budgetlab
