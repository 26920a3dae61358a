#include <gtest/gtest.h>

#include "home/loss.hpp"
#include "home/variants.hpp"
#include "test_util.hpp"

using namespace home;

TEST(Variants, NamesRoundTrip) {
  for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_EQ(parse_variant("T2-O3-Self-All"), Variant::T2O3SelfAll);
  EXPECT_EQ(parse_variant("T3-O2-Cross"), Variant::T3O2Cross);
  EXPECT_FALSE(parse_variant("HOME-T9"));
  EXPECT_THROW(build_plan("nope"), InvalidArgument);
}

TEST(Variants, BarlowTwinsCross) {
  const auto p = build_plan(Variant::BarlowTwinsCross);
  EXPECT_EQ(p.views, 2);
  ASSERT_EQ(p.units.size(), 1u);
  EXPECT_EQ(p.units[0].orders, std::vector<int>{2});
  EXPECT_EQ(p.units[0].slots, (std::vector<int>{0, 1}));
  EXPECT_EQ(p.invariance_pairs.size(), 2u);
}

TEST(Variants, SelfAllHasTwoSelfUnits) {
  const auto p = build_plan(Variant::T2O3SelfAll);
  EXPECT_EQ(p.views, 2);
  ASSERT_EQ(p.units.size(), 2u);
  for (int v = 0; v < 2; ++v) {
    EXPECT_EQ(p.units[v].orders, (std::vector<int>{2, 3}));
    EXPECT_EQ(p.units[v].slots, (std::vector<int>{v, v, v}));
    EXPECT_FALSE(p.units[v].random_view);
  }
}

TEST(Variants, T3O2CrossHasThreePairUnits) {
  const auto p = build_plan(Variant::T3O2Cross);
  EXPECT_EQ(p.views, 3);
  int order2 = 0, order3 = 0;
  for (const auto& u : p.units) {
    for (int k : u.orders) (k == 2 ? order2 : order3)++;
    EXPECT_NE(u.slots[0], u.slots[1]);
  }
  EXPECT_EQ(order2, 3);
  EXPECT_EQ(order3, 0);
  EXPECT_EQ(p.invariance_pairs.size(), 6u);
}

TEST(Variants, T3O3CrossAddsOneTripleUnit) {
  const auto p = build_plan(Variant::T3O3Cross);
  ASSERT_EQ(p.units.size(), 4u);
  EXPECT_EQ(p.units[3].orders, std::vector<int>{3});
  EXPECT_EQ(p.units[3].slots, (std::vector<int>{0, 1, 2}));
}

TEST(Variants, SelfOneDeterministicPerSeed) {
  const auto a = build_plan(Variant::T2O3SelfOne, 42);
  const auto b = build_plan(Variant::T2O3SelfOne, 42);
  for (std::uint64_t it = 0; it < 200; ++it) {
    EXPECT_EQ(resolve_iteration(a, it)[0].slots, resolve_iteration(b, it)[0].slots);
  }
}

TEST(Variants, SelfAllIndependentOfIteration) {
  const auto p = build_plan(Variant::T2O3SelfAll, 1);
  const auto first = resolve_iteration(p, 0);
  for (std::uint64_t it = 1; it < 50; ++it) {
    const auto r = resolve_iteration(p, it);
    for (std::size_t u = 0; u < r.size(); ++u) EXPECT_EQ(r[u].slots, first[u].slots);
  }
}

TEST(Variants, SelfOneViewChoiceIsBalanced) {
  const auto p = build_plan(Variant::T2O3SelfOne, 7);
  int zero = 0;
  for (std::uint64_t it = 0; it < 10000; ++it) {
    const auto r = resolve_iteration(p, it);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].slots[0], r[0].slots[1]);
    EXPECT_EQ(r[0].slots[1], r[0].slots[2]);
    zero += r[0].slots[0] == 0;
  }
  EXPECT_NEAR(zero, 5000, 150);
}

TEST(Variants, SelfOneEqualsSelfAllInExpectation) {
  const std::vector<EmbeddingBatch> z = {{oracle::random_matrix(9, 5, 1), 1},
                                         {oracle::random_matrix(9, 5, 2), 2}};
  LossConfig cfg;
  const auto all = home_loss(z, build_plan(Variant::T2O3SelfAll), cfg, 0, false);
  // Enumerate the coin flip: find one iteration picking each view.
  const auto one = build_plan(Variant::T2O3SelfOne, 3);
  double by_view[2] = {-1, -1};
  for (std::uint64_t it = 0; it < 64 && (by_view[0] < 0 || by_view[1] < 0); ++it) {
    const int v = resolve_iteration(one, it)[0].slots[0];
    by_view[v] = home_loss(z, one, cfg, it, false).redundancy_per_unit[0];
  }
  ASSERT_GE(by_view[0], 0);
  ASSERT_GE(by_view[1], 0);
  EXPECT_NEAR(0.5 * (by_view[0] + by_view[1]), all.redundancy_mean(), 1e-15);
}
