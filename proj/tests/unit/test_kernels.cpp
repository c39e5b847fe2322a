#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "budgetlab/kernels.hpp"

using namespace budgetlab;
namespace k = budgetlab::kernels;

namespace {

const std::vector<int> kLengths{0, 1, 3, 4, 5, 7, 8, 17, 64, 1000, 1003};

class IsaGuard {
 public:
  explicit IsaGuard(k::Isa isa) { k::force_isa(isa); }
  ~IsaGuard() { k::force_isa(std::nullopt); }
};

std::vector<double> uniform_vec(int n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool have_avx2() { return k::isa_available(k::Isa::kAvx2); }

}  // namespace

TEST(Kernels, IsaNames) {
  EXPECT_EQ(k::isa_name(k::Isa::kScalar), "scalar");
  EXPECT_EQ(k::isa_name(k::Isa::kAvx2), "avx2");
  EXPECT_TRUE(k::isa_available(k::Isa::kScalar));
}

TEST(Kernels, ForceIsa) {
  {
    IsaGuard g(k::Isa::kScalar);
    EXPECT_EQ(k::active_isa(), k::Isa::kScalar);
  }
  k::force_isa(k::Isa::kAvx2);
  EXPECT_EQ(k::active_isa(), have_avx2() ? k::Isa::kAvx2 : k::Isa::kScalar);
  k::force_isa(std::nullopt);
}

TEST(Kernels, ScalarReference) {
  const std::vector<double> lr{std::log(100.0), std::log(50.0)};
  const std::vector<double> lk{std::log(0.01), std::log(0.02)};
  std::vector<double> out(2);
  k::scalar::exp_saturation_loglik(lr, lk, 100.0, 60.0, 0.5, out);
  const double p0 = 100.0 * (1.0 - std::exp(-1.0));
  const double p1 = 50.0 * (1.0 - std::exp(-2.0));
  EXPECT_NEAR(out[0], -0.5 * std::pow((60.0 - p0) * 0.5, 2), 1e-12);
  EXPECT_NEAR(out[1], -0.5 * std::pow((60.0 - p1) * 0.5, 2), 1e-12);

  std::vector<double> x{0.0, 1.0, -1.0};
  EXPECT_NEAR(k::scalar::exp_shifted_sum(x, 1.0), std::exp(-1.0) + 1.0 + std::exp(-2.0), 1e-15);
  EXPECT_NEAR(x[1], 1.0, 1e-15);

  std::vector<double> w{1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(k::scalar::scale_sum_squares(w, 2.0), 4.0 + 16.0 + 36.0);
  EXPECT_DOUBLE_EQ(w[2], 6.0);
  EXPECT_DOUBLE_EQ(k::scalar::dot(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}), 32.0);
}

TEST(Kernels, LoglikEquivalence) {
  if (!have_avx2()) GTEST_SKIP() << "AVX2 not available";
  for (int n : kLengths) {
    const auto lr = uniform_vec(n, std::log(10.0), std::log(1e5), 1 + n);
    const auto lk = uniform_vec(n, std::log(1e-6), std::log(1e-1), 2 + n);
    for (double spend : {0.0, 13.0, 700.0, 25000.0}) {
      std::vector<double> a(n), b(n);
      {
        IsaGuard g(k::Isa::kScalar);
        k::exp_saturation_loglik(lr, lk, spend, 450.0, 1.0 / 35.0, a);
      }
      {
        IsaGuard g(k::Isa::kAvx2);
        k::exp_saturation_loglik(lr, lk, spend, 450.0, 1.0 / 35.0, b);
      }
      for (int i = 0; i < n; ++i) {
        // Both variants carry a few ulps of rho_max in the prediction; the
        // residual r - pred can cancel, so compare on the scale of the terms.
        const double scale = (450.0 + std::exp(lr[i])) / 35.0 * std::sqrt(2.0 * std::abs(a[i]));
        EXPECT_LE(std::abs(a[i] - b[i]), 1e-14 * std::max(std::abs(a[i]), scale) + 1e-300)
            << "n=" << n << " i=" << i << " spend=" << spend;
      }
    }
  }
}

TEST(Kernels, ExpShiftedSumEquivalence) {
  if (!have_avx2()) GTEST_SKIP() << "AVX2 not available";
  for (int n : kLengths) {
    auto base = uniform_vec(n, -700.0, 0.0, 10 + n);
    auto a = base, b = base;
    double sa, sb;
    {
      IsaGuard g(k::Isa::kScalar);
      sa = k::exp_shifted_sum(a, -3.0);
    }
    {
      IsaGuard g(k::Isa::kAvx2);
      sb = k::exp_shifted_sum(b, -3.0);
    }
    EXPECT_LE(std::abs(sa - sb), 1e-14 * std::abs(sa) + 1e-300) << n;
    for (int i = 0; i < n; ++i) EXPECT_LE(std::abs(a[i] - b[i]), 1e-14 * a[i] + 1e-300);
  }
}

TEST(Kernels, ExpUnderflowsToZero) {
  for (k::Isa isa : {k::Isa::kScalar, k::Isa::kAvx2}) {
    if (!k::isa_available(isa)) continue;
    IsaGuard g(isa);
    std::vector<double> x{-800.0, -710.0, -1e308, 0.0, -800.0};
    const double s = k::exp_shifted_sum(x, 0.0);
    EXPECT_EQ(x[0], 0.0);
    EXPECT_EQ(x[2], 0.0);
    EXPECT_EQ(x[3], 1.0);
    EXPECT_NEAR(s, 1.0, 1e-300 + 1e-15);
  }
}

TEST(Kernels, ScaleSumSquaresEquivalence) {
  if (!have_avx2()) GTEST_SKIP() << "AVX2 not available";
  for (int n : kLengths) {
    auto base = uniform_vec(n, 0.0, 1.0, 20 + n);
    auto a = base, b = base;
    double sa, sb;
    {
      IsaGuard g(k::Isa::kScalar);
      sa = k::scale_sum_squares(a, 0.37);
    }
    {
      IsaGuard g(k::Isa::kAvx2);
      sb = k::scale_sum_squares(b, 0.37);
    }
    EXPECT_LE(std::abs(sa - sb), 1e-14 * sa + 1e-300) << n;
    EXPECT_EQ(a, b);
  }
}

TEST(Kernels, DotEquivalence) {
  if (!have_avx2()) GTEST_SKIP() << "AVX2 not available";
  for (int n : kLengths) {
    const auto x = uniform_vec(n, -1.0, 1.0, 30 + n);
    const auto y = uniform_vec(n, -1.0, 1.0, 40 + n);
    double abs_sum = 0.0;
    for (int i = 0; i < n; ++i) abs_sum += std::abs(x[i] * y[i]);
    double da, db;
    {
      IsaGuard g(k::Isa::kScalar);
      da = k::dot(x, y);
    }
    {
      IsaGuard g(k::Isa::kAvx2);
      db = k::dot(x, y);
    }
    EXPECT_LE(std::abs(da - db), 1e-14 * abs_sum + 1e-300) << n;
  }
}
