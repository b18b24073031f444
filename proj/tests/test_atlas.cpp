#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <set>
#include <random>
#include <sstream>

#include "fixture_maps.hpp"
#include "mmelab/atlas.hpp"
#include "mmelab/cycles.hpp"

using namespace mmelab;
using namespace fixture_maps;

namespace {

struct Built {
  std::vector<Cycle> cycles;
  FatouAtlas atlas;
};

Built build(const RationalMap& m, GridWindow w, int k_max = 4) {
  auto cs = find_cycles(m, k_max);
  auto at = build_atlas(m, w, cs);
  return {std::move(cs), std::move(at)};
}

int cycle_through(const std::vector<Cycle>& cs, const SpherePoint& p) {
  for (const auto& c : cs) {
    for (const auto& q : c.points) {
      if (chordal_distance(p, q) < 1e-9) return c.id;
    }
  }
  return -1;
}

// Union-find over 4-neighbors with equal (cycle, phase) key.
struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

TEST(GridWindow, CellRoundTrip) {
  const GridWindow w{cplx{-0.5, 0.25}, 1.5, 100};
  EXPECT_DOUBLE_EQ(w.cell_size(), 0.03);
  for (int iy = 0; iy < 100; iy += 7) {
    for (int ix = 0; ix < 100; ix += 3) {
      const auto c = w.cell_of(w.cell_center(ix, iy));
      ASSERT_TRUE(c);
      EXPECT_EQ(c->first, ix);
      EXPECT_EQ(c->second, iy);
    }
  }
  // Row 0 is the top edge.
  EXPECT_GT(w.cell_center(0, 0).imag(), w.cell_center(0, 99).imag());
  EXPECT_FALSE(w.cell_of(cplx{5, 0}));
  EXPECT_NEAR(w.margin(w.center), 1.5, 1e-15);
}

TEST(Atlas, SquareMapHasDiskAndExterior) {
  const auto [cs, at] = build(square(), {cplx{}, 2.0, 256}, 1);
  ASSERT_EQ(at.component_count(), 2u);
  const auto in = *at.label_at(cplx{0.1, 0.1});
  const auto out = *at.label_at(cplx{1.8, -1.8});
  EXPECT_NE(in, out);
  EXPECT_TRUE(at.component(in).bounded);
  EXPECT_FALSE(at.component(out).bounded);
  EXPECT_TRUE(at.cycle_contains_infinity(at.component(out).cycle_id));
  EXPECT_DOUBLE_EQ(at.unresolved_fraction(), 0.0);
  // JULIA_NEAR cells hug the unit circle.
  for (std::size_t i = 0; i < at.labels().size(); ++i) {
    if (at.julia_near(i)) EXPECT_NEAR(std::abs(at.window().cell_center(i)), 1.0, 2 * at.cell_size());
  }
}

TEST(Atlas, ComponentDistanceExamples) {
  const auto [cs, at] = build(square(), {cplx{}, 2.0, 256}, 1);
  const auto in = *at.label_at(cplx{0.1, 0.1});
  const auto out = *at.label_at(cplx{1.8, -1.8});
  EXPECT_LE(component_distance(at, cplx{1.0, 0.0}, in), at.cell_size());
  EXPECT_LE(component_distance(at, cplx{1.0, 0.0}, out), at.cell_size());
  EXPECT_NEAR(component_distance(at, cplx{}, out), 1.0, 2 * at.cell_size());
  EXPECT_DOUBLE_EQ(component_distance(at, cplx{}, in), at.cell_size());
  EXPECT_THROW(component_distance(at, cplx{}, 99), UnknownComponent);
  EXPECT_THROW(component_distance(at, cplx{3, 0}, in), OutOfWindow);
}

TEST(Atlas, ComponentDistanceMatchesBruteForce) {
  const auto [cs, at] = build(basilica(), {cplx{}, 2.0, 128});
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(-1.99, 1.99);
  for (int trial = 0; trial < 60; ++trial) {
    const cplx z{u(gen), u(gen)};
    const auto id = static_cast<std::uint32_t>(gen() % at.component_count());
    double best = 1e300;
    for (std::size_t i = 0; i < at.labels().size(); ++i) {
      if (at.label(i) == id) best = std::min(best, std::abs(at.window().cell_center(i) - z));
    }
    EXPECT_DOUBLE_EQ(component_distance(at, z, id), std::max(best, at.cell_size()));
  }
}

TEST(Atlas, BasilicaComponents) {
  const auto [cs, at] = build(basilica(), {cplx{}, 2.0, 512});
  const int two = cycle_through(cs, SpherePoint(0.0));
  const int inf = cycle_through(cs, SpherePoint::infinity());
  ASSERT_GE(two, 0);
  const auto c0 = at.component(*at.label_at(cplx{0.0, 0.0}));
  const auto c1 = at.component(*at.label_at(cplx{-1.0, 0.0}));
  EXPECT_EQ(c0.cycle_id, two);
  EXPECT_EQ(c1.cycle_id, two);
  EXPECT_NE(c0.phase, c1.phase);
  EXPECT_TRUE(c0.bounded && c1.bounded);
  EXPECT_EQ(at.component(*at.label_at(cplx{1.9, 0.0})).cycle_id, inf);
  EXPECT_TRUE(at.has_unbounded_component());
}

TEST(Atlas, BlobsAreFourConnectedPartition) {
  const auto [cs, at] = build(basilica(), {cplx{}, 2.0, 256});
  const int n = at.resolution();
  UnionFind uf(at.labels().size());
  auto key = [&](std::size_t i) {
    const auto l = at.label(i);
    return l == FatouAtlas::kUnresolved ? std::pair{-1, -1} : std::pair{at.component(l).cycle_id, at.component(l).phase};
  };
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const auto i = at.index(ix, iy);
      if (ix + 1 < n && key(i) == key(at.index(ix + 1, iy))) uf.unite(i, at.index(ix + 1, iy));
      if (iy + 1 < n && key(i) == key(at.index(ix, iy + 1))) uf.unite(i, at.index(ix, iy + 1));
    }
  }
  // Same union-find root <=> same component id.
  std::map<std::size_t, std::uint32_t> root_to_id;
  std::map<std::uint32_t, std::size_t> id_to_root;
  std::vector<std::size_t> cells(at.component_count(), 0);
  for (std::size_t i = 0; i < at.labels().size(); ++i) {
    const auto l = at.label(i);
    if (l == FatouAtlas::kUnresolved) continue;
    const auto r = uf.find(i);
    const auto [it, fresh] = root_to_id.emplace(r, l);
    EXPECT_EQ(it->second, l);
    const auto [jt, fresh2] = id_to_root.emplace(l, r);
    EXPECT_EQ(jt->second, r);
    ++cells[l];
  }
  for (std::uint32_t id = 0; id < at.component_count(); ++id) EXPECT_EQ(cells[id], at.component(id).cells);
}

TEST(Atlas, PetalsAreSeparateComponents) {
  const auto [cs, at] = build(petal_pair(), {cplx{-0.5, 0}, 5.0, 512}, 2);
  const int par = cycle_through(cs, SpherePoint(0.0));
  const int att = cycle_through(cs, SpherePoint(-2.0));
  ASSERT_GE(par, 0);
  // Critical points are the roots of 2z^2 + 2z - 1.
  const SpherePoint crit = SpherePoint(cplx{(-1.0 - std::sqrt(3.0)) / 2.0});
  const SpherePoint other = SpherePoint(cplx{(-1.0 + std::sqrt(3.0)) / 2.0});
  const auto ma = at.label_at(crit.value());
  const auto mb = at.label_at(other.value());
  ASSERT_TRUE(ma && mb);
  const auto a = at.component(*ma), b = at.component(*mb);
  // One critical point is attracted to -2, the other to the parabolic point.
  EXPECT_TRUE((a.cycle_id == par) != (b.cycle_id == par));
  EXPECT_TRUE(a.cycle_id == att || b.cycle_id == att);
  int petals = 0;
  for (const auto& c : at.components()) petals += (c.cycle_id == par && c.bounded && c.cells > 100);
  EXPECT_GE(petals, 2);
  std::set<int> phases;
  for (const auto& c : at.components()) {
    if (c.cycle_id == par) phases.insert(c.phase);
  }
  EXPECT_EQ(phases.size(), 2u);
}

TEST(Atlas, WindowChecks) {
  const auto cs = find_cycles(basilica(), 2);
  EXPECT_THROW(build_atlas(basilica(), {cplx{}, 2.0, 32}, cs), WindowTooSmall);
  // Critical point 0 must lie inside the window.
  EXPECT_THROW(build_atlas(basilica(), {cplx{5, 5}, 1.0, 64}, cs), WindowTooSmall);
  EXPECT_NO_THROW(build_atlas(basilica(), {cplx{}, 2.0, 64}, cs));
}

TEST(Atlas, OrbitClassification) {
  const auto cs = find_cycles(basilica(), 2);
  const int two = cycle_through(cs, SpherePoint(0.0));
  const int inf = cycle_through(cs, SpherePoint::infinity());
  EXPECT_EQ(classify_orbit(basilica(), SpherePoint(cplx{0.1, 0.05}), cs)->cycle_id, two);
  EXPECT_EQ(classify_orbit(basilica(), SpherePoint(2.5), cs)->cycle_id, inf);
  EXPECT_EQ(classify_orbit(basilica(), SpherePoint::infinity(), cs)->cycle_id, inf);
  // The repelling fixed point itself never settles.
  EXPECT_FALSE(classify_orbit(basilica(), SpherePoint((1 + std::sqrt(5.0)) / 2), cs, 300));
  const auto e1 = find_cycles(parabolic2(), 2);
  EXPECT_EQ(classify_orbit(parabolic2(), SpherePoint(7.0), e1)->cycle_id, cycle_through(e1, SpherePoint::infinity()));
}

TEST(Atlas, LabelStabilityAcrossResolutions) {
  const auto cs = find_cycles(basilica(), 2);
  const auto lo = build_atlas(basilica(), {cplx{}, 2.0, 256}, cs);
  const auto hi = build_atlas(basilica(), {cplx{}, 2.0, 512}, cs);
  std::size_t changed = 0, total = 0;
  for (int iy = 0; iy < 256; ++iy) {
    for (int ix = 0; ix < 256; ++ix) {
      const auto a = lo.label(ix, iy);
      const auto b = hi.label(2 * ix, 2 * iy);
      ++total;
      const bool ua = a == FatouAtlas::kUnresolved, ub = b == FatouAtlas::kUnresolved;
      if (ua || ub) {
        changed += ua != ub;
        continue;
      }
      const auto& ca = lo.component(a);
      const auto& cb = hi.component(b);
      changed += ca.cycle_id != cb.cycle_id || ca.phase != cb.phase;
    }
  }
  EXPECT_LT(static_cast<double>(changed) / static_cast<double>(total), 0.02);
}

TEST(Atlas, ConnectivityOfPolynomials) {
  EXPECT_EQ(connectivity_of_J_polynomial(basilica()).verdict, Connectivity::connected);
  EXPECT_EQ(connectivity_of_J_polynomial(square()).verdict, Connectivity::connected);
  const auto c = connectivity_of_J_polynomial(cubic());
  EXPECT_EQ(c.verdict, Connectivity::disconnected);
  EXPECT_EQ(c.escaping_count(), 1);
  // Critical orbit oracle: 1 is fixed, -1 -> 5 -> 113 -> ... escapes.
  for (const auto& f : c.critical) {
    if (std::abs(f.point.value() - cplx{1}) < 1e-9) EXPECT_FALSE(f.escaped);
    if (std::abs(f.point.value() - cplx{-1}) < 1e-9) EXPECT_TRUE(f.escaped);
  }
  const auto z2p1 = RationalMap::polynomial(Polynomial{cplx{1}, cplx{0}, cplx{1}});
  EXPECT_EQ(connectivity_of_J_polynomial(z2p1).verdict, Connectivity::disconnected);
  EXPECT_THROW(connectivity_of_J_polynomial(parabolic2()), NotAPolynomial);
}

TEST(Atlas, CompleteInvariance) {
  const auto [cs, at] = build(basilica(), {cplx{}, 2.0, 512});
  const auto outer = *at.label_at(cplx{1.9, 1.9});
  const auto inner = *at.label_at(cplx{0.0, 0.0});
  EXPECT_TRUE(complete_invariance_check(basilica(), at, outer, 100).pass);
  const auto r = complete_invariance_check(basilica(), at, inner, 100);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.forward_failures, 100);  // the image is the component of -1
}

TEST(Atlas, WithoutComponent) {
  const auto [cs, at] = build(square(), {cplx{}, 2.0, 128}, 1);
  const auto in = *at.label_at(cplx{});
  const auto cut = at.without_component(in);
  EXPECT_EQ(*cut.label_at(cplx{}), FatouAtlas::kUnresolved);
  EXPECT_GT(cut.unresolved_fraction(), 0.15);
  EXPECT_THROW(at.without_component(7), UnknownComponent);
}

TEST(Atlas, DumpRoundTrip) {
  const auto [cs, at] = build(basilica(), {cplx{0.25, -0.5}, 2.5, 96});
  std::stringstream ss;
  write_atlas_dump(ss, at);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 8), "MMEATLAS");
  EXPECT_EQ(bytes.size(), 8u + 4 + 8 * 3 + 4 + 4u * 96 * 96);
  const auto dump = read_atlas_dump(ss);
  EXPECT_EQ(dump.window, at.window());
  ASSERT_EQ(dump.labels.size(), at.labels().size());
  for (std::size_t i = 0; i < dump.labels.size(); ++i) {
    EXPECT_EQ(dump.labels[i] & ~FatouAtlas::kJuliaNearBit, at.label(i));
    EXPECT_EQ((dump.labels[i] & FatouAtlas::kJuliaNearBit) != 0, at.julia_near(i));
  }
  std::stringstream junk("NOTATLAS");
  EXPECT_THROW(read_atlas_dump(junk), Error);
}
