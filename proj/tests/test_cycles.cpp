#include <gtest/gtest.h>

#include <random>

#include "fixture_maps.hpp"
#include "mmelab/cycles.hpp"
#include "oracles.hpp"

using namespace mmelab;
using namespace fixture_maps;

namespace {

const Cycle* find_fixed(const std::vector<Cycle>& cs, const SpherePoint& p) {
  for (const auto& c : cs) {
    if (c.period() == 1 && chordal_distance(c.points[0], p) < 1e-9) return &c;
  }
  return nullptr;
}

}  // namespace

TEST(Classify, MultiplierBands) {
  EXPECT_EQ(classify(cplx{0}).kind, CycleKind::superattracting);
  EXPECT_EQ(classify(cplx{1e-12}).kind, CycleKind::superattracting);
  EXPECT_EQ(classify(cplx{0.5, 0.5}).kind, CycleKind::attracting);
  EXPECT_EQ(classify(cplx{2}).kind, CycleKind::repelling);
  EXPECT_EQ(classify(cplx{-1}), (CycleClass{CycleKind::parabolic, 2}));
  EXPECT_EQ(classify(std::polar(1.0, 2 * M_PI / 3)), (CycleClass{CycleKind::parabolic, 3}));
  // Golden-mean rotation is not a root of unity of order <= 64.
  EXPECT_EQ(classify(std::polar(1.0, M_PI * (std::sqrt(5.0) - 1))).kind, CycleKind::neutral_other);
}

TEST(Cycles, PetalPairFixedPoints) {
  const auto cs = find_cycles(petal_pair(), 1);
  ASSERT_EQ(cs.size(), 3u);
  const auto* m2 = find_fixed(cs, SpherePoint(-2.0));
  const auto* z0 = find_fixed(cs, SpherePoint(0.0));
  const auto* inf = find_fixed(cs, SpherePoint::infinity());
  ASSERT_TRUE(m2 && z0 && inf);
  EXPECT_LT(std::abs(m2->multiplier - cplx{1.0 / 3.0}), 1e-9);
  EXPECT_LT(std::abs(z0->multiplier - cplx{-1.0}), 1e-9);
  EXPECT_LT(std::abs(inf->multiplier - cplx{2.0}), 1e-9);
  EXPECT_EQ(m2->cls.kind, CycleKind::attracting);
  EXPECT_EQ(z0->cls, (CycleClass{CycleKind::parabolic, 2}));
  EXPECT_EQ(inf->cls.kind, CycleKind::repelling);
}

TEST(Cycles, ParabolicMapStructure) {
  const auto cs = find_cycles(parabolic2(), 2);
  const auto* inf = find_fixed(cs, SpherePoint::infinity());
  ASSERT_TRUE(inf);
  EXPECT_LT(std::abs(inf->multiplier - cplx{1.0}), 1e-9);
  EXPECT_EQ(inf->cls, (CycleClass{CycleKind::parabolic, 1}));
  const Cycle* two = nullptr;
  for (const auto& c : cs) {
    if (c.period() == 2 && chordal_distance(c.points[0], SpherePoint(-0.5)) < 1e-9) two = &c;
  }
  ASSERT_TRUE(two);
  EXPECT_LT(chordal_distance(two->points[1], SpherePoint(-1.0)), 1e-9);
  EXPECT_LT(std::abs(two->multiplier), 1e-9);
  EXPECT_EQ(two->cls.kind, CycleKind::superattracting);
}

TEST(Cycles, BasilicaTwoCycle) {
  const auto cs = find_cycles(basilica(), 2);
  int found = 0;
  for (const auto& c : cs) {
    if (c.period() != 2) continue;
    if (chordal_distance(c.points[0], SpherePoint(0.0)) < 1e-12 &&
        chordal_distance(c.points[1], SpherePoint(-1.0)) < 1e-12) {
      ++found;
      EXPECT_EQ(c.cls.kind, CycleKind::superattracting);
    }
  }
  EXPECT_EQ(found, 1);
}

TEST(Cycles, OrbitsAreConsistent) {
  for (const auto& [name, map, p, q] : degree_two_fixtures()) {
    for (const auto& c : find_cycles(map, 4)) {
      for (int i = 0; i < c.period(); ++i) {
        EXPECT_LT(chordal_distance(map(c.points[static_cast<std::size_t>(i)]),
                                   c.points[static_cast<std::size_t>((i + 1) % c.period())]),
                  1e-8)
            << name;
      }
      EXPECT_LT(std::abs(c.multiplier - multiplier(map, c)), 1e-12);
    }
  }
}

TEST(Cycles, CountsMatchDegreeFormula) {
  // For degree 2, R^k has 2^k + 1 fixed points with multiplicity; points of
  // exact period k number 2^k + 1 minus those of the proper divisors.
  for (const auto& [name, map, p, q] : {degree_two_fixtures()[1], degree_two_fixtures()[0]}) {
    const auto cs = find_cycles(map, 4);
    std::vector<int> per_period(5, 0);
    for (const auto& c : cs) per_period[static_cast<std::size_t>(c.period())] += c.period();
    EXPECT_EQ(per_period[1], 3) << name;
    EXPECT_EQ(per_period[2], 2) << name;
    EXPECT_EQ(per_period[3], 6) << name;
    EXPECT_EQ(per_period[4], 12) << name;
  }
}

TEST(Cycles, AgreeWithFactorizationOracle) {
  for (const auto& [name, map, p, q] : degree_two_fixtures()) {
    const auto cs = find_cycles(map, 3);
    for (int k = 1; k <= 3; ++k) {
      // Every root of P_k - z Q_k is a point of some cycle with period | k.
      std::vector<SpherePoint> lib;
      for (const auto& c : cs) {
        if (k % c.period() == 0) lib.insert(lib.end(), c.points.begin(), c.points.end());
      }
      const auto want = oracle::periodic_points(p, q, k);
      std::size_t finite = 0;
      for (const auto& s : lib) finite += s.is_finite();
      EXPECT_EQ(finite, want.size()) << name << " k=" << k;
      for (const auto& w : want) {
        double best = 1e300;
        for (const auto& s : lib) best = std::min(best, chordal_distance(s, SpherePoint(w.center)));
        EXPECT_LT(best, 1e-9) << name << " k=" << k << " root " << w.center;
      }
    }
  }
}

TEST(Cycles, MultipliersInvariantUnderConjugation) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> g;
  for (const auto& [name, map, p, q] : degree_two_fixtures()) {
    const auto base = find_cycles(map, 2);
    for (int trial = 0; trial < 3; ++trial) {
      const cplx a{1 + 0.3 * g(gen), 0.3 * g(gen)}, b{g(gen), g(gen)};
      const auto conj = find_cycles(conjugate_affine(map, a, b), 2);
      ASSERT_EQ(conj.size(), base.size()) << name;
      for (const auto& c : base) {
        double best = 1e300;
        for (const auto& d : conj) {
          if (d.period() == c.period()) best = std::min(best, std::abs(d.multiplier - c.multiplier));
        }
        EXPECT_LT(best, 1e-7) << name;
      }
    }
  }
}

TEST(Cycles, RejectsBadPeriodBound) {
  EXPECT_THROW(find_cycles(basilica(), 0), PreconditionViolation);
  EXPECT_THROW(find_cycles(basilica(), 7), PreconditionViolation);
}
