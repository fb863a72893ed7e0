#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <set>

#include "downwash/core.hpp"
#include "downwash/rng.hpp"
#include "test_support.hpp"

using namespace downwash;
using downwash::support::at;

TEST(RelativeState, NeighbourAboveGivesNegativeD) {
  const auto rel = relative_state(at(0, 0, -1), at(0, 0, 0));
  EXPECT_EQ(rel.dpos, Vec3(0, 0, -1));
  EXPECT_EQ(rel.height_above(), 1.0);
}

TEST(RelativeState, IdenticalStatesGiveZero) {
  const auto s = at(0.3, -0.2, -0.7, Vec3(0.1, 0.5, 0));
  const auto rel = relative_state(s, s);
  EXPECT_EQ(rel.dpos, Vec3::Zero());
  EXPECT_EQ(rel.dvel, Vec3::Zero());
}

TEST(RelativeState, Componentwise) {
  const auto rel = relative_state(at(1, 2, -1, Vec3(0, 0.5, 0)), at(0, 0, 0));
  EXPECT_EQ(rel.dpos, Vec3(1, 2, -1));
  EXPECT_EQ(rel.dvel, Vec3(0, 0.5, 0));
  const auto f = rel.features();
  EXPECT_EQ(f[0], 1.0);
  EXPECT_EQ(f[4], 0.5);
}

TEST(RelativeState, Antisymmetric) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto a = support::random_state(rng, 5.0, 5.0);
    const auto b = support::random_state(rng, 5.0, 5.0);
    const auto ab = relative_state(a, b);
    const auto ba = relative_state(b, a);
    EXPECT_EQ(ab.dpos, -ba.dpos);
    EXPECT_EQ(ab.dvel, -ba.dvel);
  }
}

TEST(Wrench, AddZeroIsIdentity) {
  const Wrench6 w{1.5, -2, 0.25, 3e-3, -7, 1e10};
  EXPECT_EQ(wrench_add(w, Wrench6::zero()), w);
}

TEST(Wrench, ScaleByZeroAnnihilates) {
  const Wrench6 w{1.5, -2, 0.25, 3e-3, -7, 1e10};
  EXPECT_EQ(wrench_scale(w, 0.0), Wrench6::zero());
}

TEST(Wrench, AdditionCommutesAndAssociates) {
  Rng rng(3);
  auto draw = [&] {
    std::array<double, 6> a{};
    for (auto& v : a) v = rng.normal(0.0, 10.0);
    return Wrench6::from_array(a);
  };
  for (int i = 0; i < 1000; ++i) {
    const auto a = draw(), b = draw(), c = draw();
    EXPECT_EQ(wrench_add(a, b), wrench_add(b, a));
    const auto lhs = wrench_add(wrench_add(a, b), c);
    const auto rhs = wrench_add(a, wrench_add(b, c));
    double scale = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      scale = std::max({scale, std::abs(a[k]), std::abs(b[k]), std::abs(c[k])});
    }
    EXPECT_LE(support::max_abs_diff(lhs, rhs), 1e-12 * scale);
  }
}

TEST(Wrench, AbsSumAndAxisAccess) {
  const Wrench6 w{-1, 2, -3, 4, -5, 6};
  const auto a = wrench_abs_sum(w);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a[i], static_cast<double>(i + 1));
  EXPECT_EQ(w[2], -3.0);
  EXPECT_THROW((void)w[6], std::out_of_range);
  EXPECT_EQ(Wrench6::from_array(w.to_array()), w);
}

TEST(Wrench, FiniteCheck) {
  Wrench6 w;
  EXPECT_TRUE(w.finite());
  w.t_roll = std::nan("");
  EXPECT_FALSE(w.finite());
}

TEST(Snapshot, ValidateRejectsCoincidentNeighbour) {
  FormationSnapshot snap;
  snap.neighbours = {at(0, 0, -1), at(0, 0, 5e-7)};
  EXPECT_THROW(snap.validate(), std::invalid_argument);
  snap.neighbours.pop_back();
  EXPECT_NO_THROW(snap.validate());
  EXPECT_EQ(snap.k(), 1u);
}

TEST(Snapshot, ValidateRejectsNonFinite) {
  FormationSnapshot snap;
  snap.neighbours = {at(0, std::nan(""), -1)};
  EXPECT_THROW(snap.validate(), std::invalid_argument);
}

TEST(Snapshot, EmptyIsValid) {
  FormationSnapshot snap;
  EXPECT_NO_THROW(snap.validate());
  EXPECT_TRUE(canonical_relative_states(snap).empty());
}

TEST(Snapshot, CanonicalOrderIgnoresInputOrder) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto snap = support::random_snapshot(rng, 4);
    const auto perm = support::permuted(snap, rng);
    const auto a = canonical_relative_states(snap);
    const auto b = canonical_relative_states(perm);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      EXPECT_EQ(a[j].dpos, b[j].dpos);
      EXPECT_EQ(a[j].dvel, b[j].dvel);
    }
    for (std::size_t j = 1; j < a.size(); ++j) EXPECT_LE(a[j - 1].dpos[kD], a[j].dpos[kD]);
  }
}

TEST(Rng, SameSeedAndStreamRepeat) {
  Rng a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 1000; ++s) firsts.insert(Rng(1, s).next_u64());
  EXPECT_EQ(firsts.size(), 1000u);
}

TEST(Rng, UniformRangeAndMean) {
  Rng rng(9);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Rng, BelowIsInRange) {
  Rng rng(2);
  std::array<int, 7> hist{};
  for (int i = 0; i < 70000; ++i) ++hist[rng.below(7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Rng, DeriveSeedSeparatesNames) {
  EXPECT_NE(derive_seed(0, "init"), derive_seed(0, "shuffle"));
  EXPECT_NE(derive_seed(0, "init"), derive_seed(1, "init"));
  EXPECT_EQ(derive_seed(5, "dataset"), derive_seed(5, "dataset"));
}

TEST(Rng, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  Rng rng(4);
  shuffle(v, rng);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}
