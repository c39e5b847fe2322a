#pragma once

// Data-parallel inner loops of the particle filter. Each kernel has a scalar
// reference implementation and, on x86-64, an AVX2+FMA variant chosen at
// runtime. The variants agree to within a few ulps (see test_kernels.cpp);
// they are not bit-identical because the vector exp is a polynomial
// approximation and sums are reassociated.

#include <optional>
#include <span>
#include <string_view>

namespace budgetlab::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);
bool isa_available(Isa isa);

// ISA used by the dispatched entry points. Defaults to the best available one;
// the BUDGETLAB_ISA environment variable ("scalar" or "avx2") overrides it.
Isa active_isa();

// Pins the ISA (tests, benchmarks). std::nullopt restores auto-detection.
// Requesting an unavailable ISA falls back to scalar.
void force_isa(std::optional<Isa> isa);

// out[i] = -0.5 * ((ret - exp(log_rho[i]) * (1 - exp(-exp(log_kappa[i]) * spend))) * inv_sd)^2
void exp_saturation_loglik(std::span<const double> log_rho, std::span<const double> log_kappa,
                           double spend, double ret, double inv_sd, std::span<double> out);

// x[i] <- exp(x[i] - shift); returns the sum of the new values.
double exp_shifted_sum(std::span<double> x, double shift);

// w[i] <- w[i] * scale; returns the sum of squares of the new values.
double scale_sum_squares(std::span<double> w, double scale);

double dot(std::span<const double> a, std::span<const double> b);

namespace scalar {
void exp_saturation_loglik(std::span<const double> log_rho, std::span<const double> log_kappa,
                           double spend, double ret, double inv_sd, std::span<double> out);
double exp_shifted_sum(std::span<double> x, double shift);
double scale_sum_squares(std::span<double> w, double scale);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace scalar

#if defined(BUDGETLAB_HAVE_AVX2) || defined(BUDGETLAB_DECLARE_AVX2)
namespace avx2 {
void exp_saturation_loglik(std::span<const double> log_rho, std::span<const double> log_kappa,
                           double spend, double ret, double inv_sd, std::span<double> out);
double exp_shifted_sum(std::span<double> x, double shift);
double scale_sum_squares(std::span<double> w, double scale);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace avx2
#endif

}  // namespace budgetlab::kernels
