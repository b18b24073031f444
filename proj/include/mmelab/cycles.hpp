#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "mmelab/errors.hpp"
#include "mmelab/polynomial.hpp"
#include "mmelab/rational_map.hpp"
#include "mmelab/sphere.hpp"

namespace mmelab {

enum class CycleKind { superattracting, attracting, repelling, parabolic, neutral_other };

struct CycleClass {
  CycleKind kind = CycleKind::neutral_other;
  int parabolic_order = 0;  // m with mu^m = 1, parabolic only

  bool is_attracting() const noexcept {
    return kind == CycleKind::superattracting || kind == CycleKind::attracting;
  }
  bool is_parabolic() const noexcept { return kind == CycleKind::parabolic; }
  bool is_repelling() const noexcept { return kind == CycleKind::repelling; }

  friend bool operator==(const CycleClass&, const CycleClass&) = default;
};

inline std::string to_string(CycleKind k) {
  switch (k) {
    case CycleKind::superattracting: return "SUPERATTRACTING";
    case CycleKind::attracting: return "ATTRACTING";
    case CycleKind::repelling: return "REPELLING";
    case CycleKind::parabolic: return "PARABOLIC";
    case CycleKind::neutral_other: return "NEUTRAL_OTHER";
  }
  return "?";
}

inline std::string to_string(const CycleClass& c) {
  if (c.kind == CycleKind::parabolic) return "PARABOLIC(" + std::to_string(c.parabolic_order) + ")";
  return to_string(c.kind);
}

struct Cycle {
  std::vector<SpherePoint> points;  // points[i+1] = R(points[i]), cyclically
  cplx multiplier{};
  CycleClass cls;
  int id = 0;

  int period() const noexcept { return static_cast<int>(points.size()); }

  bool contains_infinity() const noexcept {
    return std::any_of(points.begin(), points.end(), [](const SpherePoint& p) { return p.is_infinity(); });
  }
};

struct ClassifyTolerances {
  double superattracting = 1e-9;
  double neutral_band = 1e-9;
  double root_of_unity = 1e-6;
  int max_order = 64;
};

/// Stability class from the multiplier.
inline CycleClass classify(cplx mu, const ClassifyTolerances& tol = {}) {
  const double m = std::abs(mu);
  if (m < tol.superattracting) return {CycleKind::superattracting, 0};
  if (m < 1.0 - tol.neutral_band) return {CycleKind::attracting, 0};
  if (m > 1.0 + tol.neutral_band) return {CycleKind::repelling, 0};
  cplx power{1.0};
  for (int order = 1; order <= tol.max_order; ++order) {
    power *= mu;
    if (std::abs(power - 1.0) < tol.root_of_unity) return {CycleKind::parabolic, order};
  }
  return {CycleKind::neutral_other, 0};
}

/// Product of the derivative along the cycle, each factor taken in the charts
/// of its source and target points.
inline cplx multiplier(const RationalMap& map, const std::vector<SpherePoint>& points) {
  cplx mu{1.0};
  const std::size_t k = points.size();
  for (std::size_t i = 0; i < k; ++i) {
    const SpherePoint& src = points[i];
    const SpherePoint& dst = points[(i + 1) % k];
    const Chart in = chart_of(src);
    mu *= map.local_derivative(to_chart(src, in), in, chart_of(dst));
  }
  return mu;
}

inline cplx multiplier(const RationalMap& map, const Cycle& cycle) { return multiplier(map, cycle.points); }

namespace detail {

// Newton's method on F(x) - x, where F is R^k read in the chart of the start
// point. Stops when the step stalls; keeps the best iterate seen.
inline SpherePoint polish_periodic_point(const RationalMap& map, SpherePoint z, int k) {
  if (z.is_infinity()) return z;
  auto residual = [&](const SpherePoint& p) {
    SpherePoint q = p;
    for (int i = 0; i < k; ++i) q = map(q);
    return chordal_distance(q, p);
  };
  SpherePoint best = z;
  double best_res = residual(z);
  for (int it = 0; it < 200 && best_res > 0.0; ++it) {
    const Chart c0 = chart_of(z);
    const cplx x0 = to_chart(z, c0);
    SpherePoint q = z;
    cplx deriv{1.0};
    for (int i = 0; i < k; ++i) {
      const Chart in = chart_of(q);
      const SpherePoint next = map(q);
      const Chart out = (i == k - 1) ? c0 : chart_of(next);
      deriv *= map.local_derivative(to_chart(q, in), in, out);
      q = next;
    }
    if (q.is_infinity() && c0 == Chart::direct) break;
    const cplx fx = to_chart(q, c0);
    const cplx den = deriv - 1.0;
    if (den == cplx{}) break;
    const cplx step = (fx - x0) / den;
    const cplx x1 = x0 - step;
    if (!std::isfinite(x1.real()) || !std::isfinite(x1.imag())) break;
    z = from_chart(x1, c0);
    const double r = residual(z);
    if (r < best_res) {
      best = z;
      best_res = r;
    }
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x0))) break;
  }
  return best;
}

// Canonical starting point of an orbit: smallest modulus, infinity last.
inline bool canonical_less(const SpherePoint& a, const SpherePoint& b) {
  if (a.is_infinity() != b.is_infinity()) return b.is_infinity();
  if (a.is_infinity()) return false;
  const double ma = std::abs(a.value());
  const double mb = std::abs(b.value());
  if (ma != mb) return ma < mb;
  if (a.value().real() != b.value().real()) return a.value().real() < b.value().real();
  return a.value().imag() < b.value().imag();
}

}  // namespace detail

struct CycleSearchOptions {
  double orbit_tolerance = 1e-7;    // chordal; grouping, deduplication, minimality
  double closure_tolerance = 1e-8;  // chordal; R^k(z) vs z for accepted cycles
  int degree_cap = kDefaultDegreeCap;
  RootSolverOptions roots{};
};

/// All cycles of exact period k <= k_max. Fixed points of R^k come from the
/// roots of numerator(R^k) - z denominator(R^k); infinity is added when R^k
/// fixes it. Candidates are Newton-polished on R^k, reduced to their minimal
/// period and deduplicated by orbit.
inline std::vector<Cycle> find_cycles(const RationalMap& map, int k_max, const CycleSearchOptions& opt = {}) {
  if (k_max < 1 || k_max > 6) throw PreconditionViolation("find_cycles: k_max must lie in [1, 6]");
  std::vector<Cycle> out;
  auto already_known = [&](const SpherePoint& z) {
    for (const auto& c : out) {
      for (const auto& p : c.points) {
        if (chordal_distance(p, z) < opt.orbit_tolerance) return true;
      }
    }
    return false;
  };

  for (int k = 1; k <= k_max; ++k) {
    const RationalMap rk = iterate_map(map, k, opt.degree_cap);
    const Polynomial fixed = rk.numerator() - rk.denominator().shifted(1);
    std::vector<Root> candidates;
    if (fixed.degree() >= 1) candidates = poly_roots(fixed, opt.roots).roots;
    {
      SpherePoint q = SpherePoint::infinity();
      for (int i = 0; i < k; ++i) q = map(q);
      if (q.is_infinity()) candidates.push_back({SpherePoint::infinity(), 1});
    }

    for (const auto& cand : candidates) {
      // Newton only converges linearly at a multiple root and wanders inside a
      // flat residual well; the cluster mean is the better estimate there.
      SpherePoint z = cand.multiplicity == 1 ? detail::polish_periodic_point(map, cand.point, k) : cand.point;
      std::vector<SpherePoint> orbit{z};
      SpherePoint q = z;
      int minimal = k;
      for (int j = 1; j <= k; ++j) {
        q = map(q);
        if (chordal_distance(q, z) < opt.orbit_tolerance) {
          minimal = j;
          break;
        }
        orbit.push_back(q);
      }
      if (minimal != k) continue;
      if (chordal_distance(q, z) >= opt.closure_tolerance) continue;
      if (std::any_of(orbit.begin(), orbit.end(), already_known)) continue;

      auto first = std::min_element(orbit.begin(), orbit.end(), detail::canonical_less);
      std::rotate(orbit.begin(), first, orbit.end());
      Cycle c;
      c.points = std::move(orbit);
      c.multiplier = multiplier(map, c.points);
      c.cls = classify(c.multiplier);
      c.id = static_cast<int>(out.size());
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace mmelab
