#include <cmath>

#include "budgetlab/kernels.hpp"

namespace budgetlab::kernels::scalar {

void exp_saturation_loglik(std::span<const double> log_rho, std::span<const double> log_kappa,
                           double spend, double ret, double inv_sd, std::span<double> out) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = std::exp(log_rho[i]) * -std::expm1(-std::exp(log_kappa[i]) * spend);
    const double z = (ret - pred) * inv_sd;
    out[i] = -0.5 * z * z;
  }
}

double exp_shifted_sum(std::span<double> x, double shift) {
  double sum = 0.0;
  for (double& v : x) {
    v = std::exp(v - shift);
    sum += v;
  }
  return sum;
}

double scale_sum_squares(std::span<double> w, double scale) {
  double sum = 0.0;
  for (double& v : w) {
    v *= scale;
    sum += v * v;
  }
  return sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace budgetlab::kernels::scalar
