// Compiled with -mavx2 -mfma; only called after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "budgetlab/kernels.hpp"

namespace budgetlab::kernels::avx2 {

namespace {

// Cephes-style exp: x = n*ln2 + r, rational approximation of e^r on
// [-ln2/2, ln2/2], then scale by 2^n through the exponent bits.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125E-1), x);
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(1.26177193074810590878E-4);
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(3.02994407707441961300E-2));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042E-6);
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.52448340349684104192E-3));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

  __m256i n = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(fx));
  n = _mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(n));
  return _mm256_blendv_pd(r, _mm256_setzero_pd(), underflow);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void exp_saturation_loglik(std::span<const double> log_rho, std::span<const double> log_kappa,
                           double spend, double ret, double inv_sd, std::span<double> out) {
  const std::size_t n = out.size();
  const __m256d neg_spend = _mm256_set1_pd(-spend);
  const __m256d vret = _mm256_set1_pd(ret);
  const __m256d vinv = _mm256_set1_pd(inv_sd);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d neg_half = _mm256_set1_pd(-0.5);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d rho = exp_pd(_mm256_loadu_pd(log_rho.data() + i));
    const __m256d kappa = exp_pd(_mm256_loadu_pd(log_kappa.data() + i));
    const __m256d u = _mm256_sub_pd(one, exp_pd(_mm256_mul_pd(kappa, neg_spend)));
    const __m256d z = _mm256_mul_pd(_mm256_fnmadd_pd(rho, u, vret), vinv);
    _mm256_storeu_pd(out.data() + i, _mm256_mul_pd(neg_half, _mm256_mul_pd(z, z)));
  }
  for (; i < n; ++i) {
    const double pred = std::exp(log_rho[i]) * -std::expm1(-std::exp(log_kappa[i]) * spend);
    const double z = (ret - pred) * inv_sd;
    out[i] = -0.5 * z * z;
  }
}

double exp_shifted_sum(std::span<double> x, double shift) {
  const std::size_t n = x.size();
  const __m256d vshift = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x.data() + i), vshift));
    _mm256_storeu_pd(x.data() + i, v);
    acc = _mm256_add_pd(acc, v);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    x[i] = std::exp(x[i] - shift);
    sum += x[i];
  }
  return sum;
}

double scale_sum_squares(std::span<double> w, double scale) {
  const std::size_t n = w.size();
  const __m256d vscale = _mm256_set1_pd(scale);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_mul_pd(_mm256_loadu_pd(w.data() + i), vscale);
    _mm256_storeu_pd(w.data() + i, v);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    w[i] *= scale;
    sum += w[i] * w[i];
  }
  return sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace budgetlab::kernels::avx2
