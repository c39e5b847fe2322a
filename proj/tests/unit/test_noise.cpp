#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "budgetlab/noise.hpp"

using namespace budgetlab;

TEST(NoiseStream, SameKeySameDeviate) {
  NoiseStream a(42), b(42);
  const NoiseKey k{3, 2, Purpose::kExecution, 0};
  EXPECT_EQ(a.normal(k), b.normal(k));
  EXPECT_EQ(a.uniform(k), b.uniform(k));
}

TEST(NoiseStream, IndependentOfCallOrder) {
  NoiseStream s(7);
  const NoiseKey k1{1, 0, Purpose::kExecution, 0};
  const NoiseKey k2{1, 1, Purpose::kObservation, 0};
  const double first = s.normal(k1);
  (void)s.normal(k2);
  (void)s.uniform(k2);
  EXPECT_EQ(s.normal(k1), first);
}

TEST(NoiseStream, KeysAndSeedsSeparateDraws) {
  NoiseStream s(7);
  std::set<double> seen;
  for (int w = 0; w < 20; ++w) {
    for (int d = 0; d < 7; ++d) {
      seen.insert(s.normal({w, d, Purpose::kExecution, 0}));
      seen.insert(s.normal({w, d, Purpose::kObservation, 0}));
    }
  }
  EXPECT_EQ(seen.size(), 280u);
  EXPECT_NE(NoiseStream(1).normal({}), NoiseStream(2).normal({}));
  EXPECT_NE(s.derive(1).normal({}), s.derive(2).normal({}));
  EXPECT_EQ(s.derive(5).normal({}), NoiseStream(7).derive(5).normal({}));
}

TEST(NoiseStream, UniformOpenInterval) {
  NoiseStream s(99);
  for (std::uint32_t i = 0; i < 20000; ++i) {
    const double u = s.uniform({0, 0, Purpose::kPfResample, i});
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(NoiseStream, NormalMoments) {
  NoiseStream s(2024);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal({i, 0, Purpose::kExecution, 0});
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  // 5 standard errors
  EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(var, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(KeyRecorder, SortedUnique) {
  KeyRecorder r;
  r.record({2, 0, Purpose::kExecution, 0});
  r.record({1, 0, Purpose::kExecution, 0});
  r.record({2, 0, Purpose::kExecution, 0});
  const auto keys = r.sorted_unique();
  ASSERT_EQ(keys.size(), 2u);
  EXPECT_EQ(keys[0].week, 1);
  EXPECT_EQ(keys[1].week, 2);
}
