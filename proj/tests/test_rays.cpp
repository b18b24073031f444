#include <gtest/gtest.h>

#include <sstream>

#include "fixture_maps.hpp"
#include "mmelab/rays.hpp"
#include "oracles.hpp"

using namespace mmelab;
using namespace fixture_maps;

namespace {

// Turn distance on the circle.
double circle_gap(double a, double b) {
  const double d = std::abs(a - b);
  return std::min(d, 1.0 - d);
}

const double kAlpha = (1.0 - std::sqrt(5.0)) / 2.0;  // root of z^2 - z - 1 inside the unit disk

}  // namespace

TEST(Angle, ReducesAndParses) {
  EXPECT_EQ(Angle(2, 6), Angle(1, 3));
  EXPECT_EQ(Angle(4, 3), Angle(1, 3));
  EXPECT_EQ(Angle::parse("2/3"), Angle(2, 3));
  EXPECT_EQ(Angle::parse("0.25"), Angle(1, 4));
  EXPECT_EQ(Angle::parse("0"), Angle(0, 1));
  EXPECT_EQ(Angle::parse("1.5"), Angle(1, 2));
  EXPECT_THROW(Angle::parse("1/0"), PreconditionViolation);
  EXPECT_THROW(Angle::parse("x/3"), PreconditionViolation);
  EXPECT_THROW(Angle::parse("0.2a"), PreconditionViolation);
  EXPECT_THROW(Angle(1, 0), PreconditionViolation);
  EXPECT_EQ(Angle(1, 3).to_string(), "1/3");
}

TEST(Angle, DoublingIsExact) {
  Angle a(1, 7);
  const std::vector<Angle> want{Angle(2, 7), Angle(4, 7), Angle(1, 7)};
  for (const auto& w : want) {
    a = a.times(2);
    EXPECT_EQ(a, w);
  }
  // Large denominators do not overflow.
  const Angle big(123456789012345ULL, 999999999999989ULL);
  const Angle twice = big.times(2);
  EXPECT_EQ(twice.num(), 246913578024690ULL);
  EXPECT_EQ(Angle(1, 3).negated(), Angle(2, 3));
  EXPECT_LT(Angle(1, 3), Angle(1, 2));
}

TEST(Angle, FromDoubleRecoversRationals) {
  for (std::uint64_t q = 1; q < 60; ++q) {
    for (std::uint64_t p = 0; p < q; ++p) {
      EXPECT_EQ(Angle::from_double(static_cast<double>(p) / static_cast<double>(q)), Angle(p, q));
    }
  }
  EXPECT_THROW(Angle::from_double(NAN), PreconditionViolation);
}

TEST(Rays, SquareMapRaysLandOnCircle) {
  const auto r0 = trace_ray(square(), Angle(0, 1));
  const auto r1 = trace_ray(square(), Angle(1, 2));
  ASSERT_EQ(r0.status, RayStatus::landed);
  ASSERT_EQ(r1.status, RayStatus::landed);
  EXPECT_LT(std::abs(*r0.landing_point - cplx{1}), 1e-6);
  EXPECT_LT(std::abs(*r1.landing_point - cplx{-1}), 1e-6);
  // Rays of z^2 are radial lines.
  for (const auto& s : r0.samples) EXPECT_LT(std::abs(s.point.imag()), 1e-9);
  const auto c = colanding_pair(square(), Angle(0, 1), Angle(1, 2));
  EXPECT_EQ(c.verdict, ColandingVerdict::distinct);
}

TEST(Rays, BasilicaThirdsColandAtAlpha) {
  const auto c = colanding_pair(basilica(), Angle(1, 3), Angle(2, 3));
  ASSERT_EQ(c.verdict, ColandingVerdict::coland);
  EXPECT_LT(std::abs(*c.point - cplx{kAlpha}), 1e-6);
  // The two rays are complex conjugates.
  for (std::size_t i = 0; i < c.ray0.samples.size(); i += 50) {
    EXPECT_LT(std::abs(c.ray0.samples[i].point - std::conj(c.ray1.samples[i].point)), 1e-9);
  }
}

TEST(Rays, SamplesLieOnTheRayByBottcherOracle) {
  const cplx cpar{-1};
  for (const auto& theta : {Angle(1, 3), Angle(1, 4), Angle(1, 7)}) {
    const auto ray = trace_ray(basilica(), theta);
    ASSERT_NE(ray.status, RayStatus::lost);
    for (std::size_t i = 0; i < ray.samples.size(); i += 37) {
      const auto& s = ray.samples[i];
      if (s.potential < 1e-6) continue;
      // Push forward until far from the Julia set, where the product formula
      // for the Boettcher map converges with principal branches.
      cplx z = s.point;
      Angle a = theta;
      double g = s.potential;
      int m = 0;
      while (std::abs(z) < 10.0 && m < 200) {
        z = z * z + cpar;
        a = a.times(2);
        g *= 2;
        ++m;
      }
      const auto [turns, potential] = oracle::bottcher_angle(cpar, z);
      EXPECT_LT(circle_gap(turns, a.turns()), 1e-6) << theta.to_string() << " sample " << i;
      EXPECT_NEAR(potential, g, 1e-6 * std::max(1.0, g)) << theta.to_string() << " sample " << i;
    }
  }
}

TEST(Rays, PotentialDecreasesStrictly) {
  const auto ray = trace_ray(basilica(), Angle(1, 5));
  for (std::size_t i = 1; i < ray.samples.size(); ++i) EXPECT_LT(ray.samples[i].potential, ray.samples[i - 1].potential);
  EXPECT_EQ(ray.map_fingerprint, basilica().fingerprint());
}

TEST(Rays, NonMonicPolynomialMatchesMonicConjugate) {
  // 2 z^2 - 1/2 is conjugate to z^2 - 1 by z -> 2 z.
  const auto m = RationalMap::polynomial(Polynomial{cplx{-0.5}, cplx{0}, cplx{2}});
  const auto a = trace_ray(m, Angle(1, 3));
  const auto b = trace_ray(basilica(), Angle(1, 3));
  ASSERT_EQ(a.status, RayStatus::landed);
  EXPECT_LT(std::abs(*a.landing_point * 2.0 - *b.landing_point), 1e-6);
}

TEST(Rays, Preconditions) {
  EXPECT_THROW(trace_ray(parabolic2(), Angle(1, 3)), NotAPolynomial);
  EXPECT_THROW(trace_ray(cubic(), Angle(1, 3)), JNotConnected);
  TraceOptions bad;
  bad.r_start = 0.5;
  EXPECT_THROW(trace_ray(basilica(), Angle(1, 3), bad), PreconditionViolation);
}

TEST(Rays, LandingNeedsTightTail) {
  RayTrace ray;
  ray.status = RayStatus::not_landed;
  for (int i = 0; i < 10; ++i) ray.samples.push_back({1.0 / (i + 1), 0, cplx{0.1 * i, 0}});
  EXPECT_FALSE(landing(ray));
  ray.status = RayStatus::lost;
  EXPECT_THROW(landing(ray), PreconditionViolation);
}

TEST(Rays, CutPointSeparatesBasilicaComponents) {
  const auto cs = find_cycles(basilica(), 2);
  const auto atlas = build_atlas(basilica(), {cplx{}, 2.0, 512}, cs);
  const auto c = colanding_pair(basilica(), Angle(1, 3), Angle(2, 3));
  ASSERT_EQ(c.verdict, ColandingVerdict::coland);
  const auto cut = cut_point_check(atlas, c.ray0, c.ray1, *c.point);
  EXPECT_TRUE(cut.separated);
  ASSERT_TRUE(cut.component_a && cut.component_b);
  EXPECT_TRUE(atlas.component(*cut.component_a).bounded);
  EXPECT_TRUE(atlas.component(*cut.component_b).bounded);
  // Probes sit on the real axis on either side of alpha.
  EXPECT_LT(std::abs(cut.probe_a.imag()), 1e-6);
  EXPECT_NEAR(std::abs(cut.probe_a - cut.probe_b), 0.1, 1e-9);
}

TEST(Rays, CsvLayout) {
  const auto ray = trace_ray(square(), Angle(1, 4));
  std::ostringstream os;
  write_ray_csv(os, ray);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "r,re,im");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, ray.samples.size());
}
