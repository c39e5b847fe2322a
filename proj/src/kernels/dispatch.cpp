#include <atomic>
#include <cstdlib>
#include <string>

#include "budgetlab/kernels.hpp"

namespace budgetlab::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(BUDGETLAB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("BUDGETLAB_ISA")) {
    const std::string v(env);
    if (v == "scalar") return Isa::kScalar;
    if (v == "avx2" && cpu_has_avx2()) return Isa::kAvx2;
  }
  return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

// -1: not yet resolved.
std::atomic<int> g_isa{-1};

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::kScalar || cpu_has_avx2(); }

Isa active_isa() {
  int v = g_isa.load(std::memory_order_relaxed);
  if (v < 0) {
    v = static_cast<int>(detect());
    g_isa.store(v, std::memory_order_relaxed);
  }
  return static_cast<Isa>(v);
}

void force_isa(std::optional<Isa> isa) {
  if (!isa) {
    g_isa.store(static_cast<int>(detect()));
    return;
  }
  g_isa.store(static_cast<int>(isa_available(*isa) ? *isa : Isa::kScalar));
}

#if defined(BUDGETLAB_HAVE_AVX2)
#define BUDGETLAB_DISPATCH(fn, ...) \
  (active_isa() == Isa::kAvx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define BUDGETLAB_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void exp_saturation_loglik(std::span<const double> log_rho, std::span<const double> log_kappa,
                           double spend, double ret, double inv_sd, std::span<double> out) {
  BUDGETLAB_DISPATCH(exp_saturation_loglik, log_rho, log_kappa, spend, ret, inv_sd, out);
}

double exp_shifted_sum(std::span<double> x, double shift) {
  return BUDGETLAB_DISPATCH(exp_shifted_sum, x, shift);
}

double scale_sum_squares(std::span<double> w, double scale) {
  return BUDGETLAB_DISPATCH(scale_sum_squares, w, scale);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return BUDGETLAB_DISPATCH(dot, a, b);
}

}  // namespace budgetlab::kernels
