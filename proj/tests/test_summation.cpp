#include <gtest/gtest.h>

#include <atomic>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "home/parallel.hpp"
#include "home/rng.hpp"
#include "home/summation.hpp"

using namespace home;

TEST(CompensatedSum, RecoversCancelledSmallTerms) {
  CompensatedSum s;
  s.add(1e16);
  for (int i = 0; i < 1000; ++i) s.add(1.0);
  s.add(-1e16);
  EXPECT_EQ(s.value(), 1000.0);
}

TEST(CompensatedSum, EmptyIsZero) { EXPECT_EQ(CompensatedSum{}.value(), 0.0); }

TEST(PairwiseDot, MatchesLongDoubleOnLongVectors) {
  Rng rng = make_rng(3, {});
  for (std::size_t n : {1u, 3u, 64u, 65u, 257u, 10001u}) {
    std::vector<double> a(n), b(n);
    long double ref = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = standard_normal(rng);
      b[i] = standard_normal(rng);
      ref += static_cast<long double>(a[i]) * b[i];
    }
    EXPECT_NEAR(pairwise_dot(a.data(), b.data(), n), static_cast<double>(ref),
                1e-13 * std::sqrt(static_cast<double>(n)))
        << n;
  }
}

TEST(PairwiseDot, ZeroLength) { EXPECT_EQ(pairwise_dot(nullptr, nullptr, 0), 0.0); }

TEST(Rng, DeriveSeedIsDeterministicAndTagSensitive) {
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
  EXPECT_NE(derive_seed(7, {}), derive_seed(7, {0}));
}

TEST(Rng, Uniform01InUnitInterval) {
  Rng rng = make_rng(1, {});
  double mean = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u;
  }
  EXPECT_NEAR(mean / 100000, 0.5, 0.005);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (int threads : {1, 2, 7}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) ASSERT_EQ(h.load(), 1);
  }
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 42) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
