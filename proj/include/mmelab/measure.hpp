#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmelab/atlas.hpp"
#include "mmelab/cycles.hpp"
#include "mmelab/errors.hpp"
#include "mmelab/parallel.hpp"
#include "mmelab/rational_map.hpp"
#include "mmelab/sampler.hpp"

namespace mmelab {

inline constexpr int kResidual = -1;

struct MeasureEstimate {
  int component_id = kResidual;
  double epsilon = 0.0;
  double estimate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;         // samples in the denominator
  std::size_t excluded = 0;  // samples outside the window (or at infinity)
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for k successes out of n at z = 1.96.
inline Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.96) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return {std::clamp(std::min(center - half, p), 0.0, 1.0), std::clamp(std::max(center + half, p), 0.0, 1.0)};
}

inline bool intervals_overlap(const MeasureEstimate& a, const MeasureEstimate& b) {
  return a.ci_lo <= b.ci_hi && b.ci_lo <= a.ci_hi;
}

namespace detail {

inline void check_measure_inputs(const MMESampleSet& samples, const FatouAtlas& atlas, double epsilon) {
  // A relative slack keeps eps = 2 * cell size itself admissible.
  if (epsilon < 2.0 * atlas.cell_size() * (1.0 - 1e-12)) {
    throw EpsilonBelowResolution("epsilon " + format_double(epsilon) + " is below two cells (" +
                                 format_double(2.0 * atlas.cell_size()) + ")");
  }
  if (samples.map_fingerprint != atlas.map_fingerprint()) {
    throw PreconditionViolation("samples and atlas were built from different maps");
  }
}

inline MeasureEstimate make_estimate(int id, double eps, std::size_t hits, std::size_t n, std::size_t excluded) {
  const Interval ci = wilson_interval(hits, n);
  const double est = n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
  return {id, eps, est, ci.lo, ci.hi, n, excluded};
}

}  // namespace detail

struct EpsilonCounts {
  std::vector<std::size_t> hits;  // per requested component
  std::size_t residual = 0;       // near no component at all
  std::size_t n = 0;
  std::size_t excluded = 0;
};

/// One pass over the samples: for each requested component, how many samples
/// lie within epsilon of it; plus how many lie within epsilon of none.
inline EpsilonCounts count_near_components(const MMESampleSet& samples, const FatouAtlas& atlas,
                                           std::span<const std::uint32_t> ids, double epsilon) {
  detail::check_measure_inputs(samples, atlas, epsilon);
  for (auto id : ids) atlas.component(id);
  const std::size_t total = samples.points.size();
  const std::size_t chunk = 4096;
  const std::size_t chunks = (total + chunk - 1) / chunk;
  std::vector<EpsilonCounts> partial(chunks);
  std::vector<std::int32_t> slot(atlas.component_count(), -1);
  for (std::size_t i = 0; i < ids.size(); ++i) slot[ids[i]] = static_cast<std::int32_t>(i);

  parallel_for(chunks, [&](std::size_t c) {
    EpsilonCounts& acc = partial[c];
    acc.hits.assign(ids.size(), 0);
    std::vector<std::uint8_t> seen(ids.size(), 0);
    const std::size_t end = std::min(total, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const SpherePoint& p = samples.points[i];
      if (p.is_infinity() || !atlas.window().contains(p.value())) {
        ++acc.excluded;
        continue;
      }
      ++acc.n;
      std::fill(seen.begin(), seen.end(), 0);
      bool any = false;
      atlas.for_each_component_within(p.value(), epsilon, [&](std::uint32_t l) {
        any = true;
        if (const auto s = slot[l]; s >= 0) seen[static_cast<std::size_t>(s)] = 1;
      });
      if (!any) ++acc.residual;
      for (std::size_t k = 0; k < ids.size(); ++k) acc.hits[k] += seen[k];
    }
  });

  EpsilonCounts out;
  out.hits.assign(ids.size(), 0);
  for (const auto& p : partial) {
    for (std::size_t k = 0; k < ids.size(); ++k) out.hits[k] += p.hits[k];
    out.residual += p.residual;
    out.n += p.n;
    out.excluded += p.excluded;
  }
  return out;
}

/// Fraction of samples within epsilon of component `id`. Samples outside the
/// atlas window are left out of the denominator and counted in `excluded`.
inline MeasureEstimate boundary_measure(const MMESampleSet& samples, const FatouAtlas& atlas, std::uint32_t id,
                                        double epsilon) {
  const std::uint32_t ids[] = {id};
  const auto c = count_near_components(samples, atlas, ids, epsilon);
  return detail::make_estimate(static_cast<int>(id), epsilon, c.hits[0], c.n, c.excluded);
}

inline std::vector<MeasureEstimate> boundary_measures(const MMESampleSet& samples, const FatouAtlas& atlas,
                                                      std::span<const std::uint32_t> ids, double epsilon) {
  const auto c = count_near_components(samples, atlas, ids, epsilon);
  std::vector<MeasureEstimate> out;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    out.push_back(detail::make_estimate(static_cast<int>(ids[k]), epsilon, c.hits[k], c.n, c.excluded));
  }
  return out;
}

/// Fraction of samples farther than epsilon from every labeled component.
inline MeasureEstimate residual_mass(const MMESampleSet& samples, const FatouAtlas& atlas, double epsilon) {
  const auto c = count_near_components(samples, atlas, {}, epsilon);
  return detail::make_estimate(kResidual, epsilon, c.residual, c.n, c.excluded);
}

/// Interior probe cells of a component: labeled `id`, not JULIA_NEAR, with no
/// JULIA_NEAR 4-neighbor. Picks up to `count` of them deterministically.
inline std::vector<cplx> interior_probes(const FatouAtlas& atlas, std::uint32_t id, int count,
                                         std::uint64_t rng_seed = 0x5eed) {
  const int n = atlas.resolution();
  std::vector<std::size_t> eligible;
  for (int iy = 1; iy < n - 1; ++iy) {
    for (int ix = 1; ix < n - 1; ++ix) {
      if (atlas.label(ix, iy) != id || atlas.julia_near(ix, iy) || atlas.julia_near(ix - 1, iy) ||
          atlas.julia_near(ix + 1, iy) || atlas.julia_near(ix, iy - 1) || atlas.julia_near(ix, iy + 1)) {
        continue;
      }
      eligible.push_back(atlas.index(ix, iy));
    }
  }
  std::vector<cplx> out;
  if (eligible.empty()) return out;
  const CounterRng rng(rng_seed);
  for (int i = 0; i < count; ++i) {
    auto k = static_cast<std::size_t>(rng.uniform(static_cast<std::uint64_t>(i)) * static_cast<double>(eligible.size()));
    out.push_back(atlas.window().cell_center(eligible[std::min(k, eligible.size() - 1)]));
  }
  return out;
}

/// Component that the forward images of interior probes of `id` land in, if
/// they all agree.
inline std::optional<std::uint32_t> forward_component(const RationalMap& map, const FatouAtlas& atlas,
                                                      std::uint32_t id, int probes = 16) {
  const OrbitClassifier classifier(map, atlas.cycles(), atlas.orbit_options());
  std::optional<std::uint32_t> target;
  const auto pts = interior_probes(atlas, id, probes);
  if (pts.empty()) return std::nullopt;
  for (const auto& z : pts) {
    const auto hits = locate_components(atlas, classifier, map(SpherePoint(z)));
    if (hits.size() != 1) return std::nullopt;
    if (target && *target != hits[0]) return std::nullopt;
    target = hits[0];
  }
  return target;
}

struct GrandOrbitResult {
  bool pass = true;
  double max_difference = 0.0;
  std::vector<MeasureEstimate> estimates;
};

/// Boundary measures of the components of one forward cycle of components
/// agree: pass iff every pair of Wilson intervals overlaps. The listed
/// components must be permuted cyclically by the map, which is checked by
/// pushing interior probes forward.
inline GrandOrbitResult grand_orbit_equality(const RationalMap& map, const MMESampleSet& samples,
                                             const FatouAtlas& atlas, std::span<const std::uint32_t> ids,
                                             double epsilon) {
  GrandOrbitResult out;
  if (ids.empty()) return out;
  if (ids.size() > 1) {
    std::map<std::uint32_t, std::uint32_t> next;
    for (auto id : ids) {
      const auto img = forward_component(map, atlas, id);
      if (!img || std::find(ids.begin(), ids.end(), *img) == ids.end()) {
        throw PreconditionViolation("grand_orbit_equality: component " + std::to_string(id) +
                                    " does not map into the listed components");
      }
      next[id] = *img;
    }
    std::uint32_t cur = ids[0];
    for (std::size_t s = 1; s < ids.size(); ++s) {
      cur = next[cur];
      if (cur == ids[0]) throw PreconditionViolation("grand_orbit_equality: components split into several cycles");
    }
    if (next[cur] != ids[0]) throw PreconditionViolation("grand_orbit_equality: components do not form a cycle");
  }
  out.estimates = boundary_measures(samples, atlas, ids, epsilon);
  for (std::size_t i = 0; i < out.estimates.size(); ++i) {
    for (std::size_t j = i + 1; j < out.estimates.size(); ++j) {
      out.max_difference =
          std::max(out.max_difference, std::abs(out.estimates[i].estimate - out.estimates[j].estimate));
      if (!intervals_overlap(out.estimates[i], out.estimates[j])) out.pass = false;
    }
  }
  return out;
}

enum class DichotomyVerdict { boundary_is_j_candidate, measure_zero_candidate, ambiguous };

inline std::string to_string(DichotomyVerdict v) {
  switch (v) {
    case DichotomyVerdict::boundary_is_j_candidate: return "BOUNDARY_IS_J_CANDIDATE";
    case DichotomyVerdict::measure_zero_candidate: return "MEASURE_ZERO_CANDIDATE";
    case DichotomyVerdict::ambiguous: return "AMBIGUOUS";
  }
  return "?";
}

/// Identifies "the same" Fatou component across atlases of different
/// resolutions: either the component containing a point, or (without a point)
/// the largest blob carrying the given (cycle, phase).
struct ComponentAnchor {
  std::string name;
  std::optional<cplx> point;
  int cycle_id = -1;
  int phase = 0;
};

/// Component id of the anchor in this atlas, if it resolves.
inline std::optional<std::uint32_t> resolve_anchor(const FatouAtlas& atlas, const ComponentAnchor& a) {
  auto matches = [&](std::uint32_t l) {
    if (l == FatouAtlas::kUnresolved) return false;
    const auto& c = atlas.component(l);
    return c.cycle_id == a.cycle_id && c.phase == a.phase;
  };
  if (a.point) {
    const auto cell = atlas.window().cell_of(*a.point);
    if (!cell) return std::nullopt;
    const auto [cx, cy] = *cell;
    if (matches(atlas.label(cx, cy))) return atlas.label(cx, cy);
    const int n = atlas.resolution();
    for (int r = 1; r <= 2; ++r) {
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int ix = cx + dx, iy = cy + dy;
          if (ix >= 0 && iy >= 0 && ix < n && iy < n && matches(atlas.label(ix, iy))) return atlas.label(ix, iy);
        }
      }
    }
    return std::nullopt;
  }
  std::optional<std::uint32_t> best;
  for (std::uint32_t id = 0; id < atlas.component_count(); ++id) {
    if (!matches(id)) continue;
    if (!best || atlas.component(id).cells > atlas.component(*best).cells) best = id;
  }
  return best;
}

/// Components worth tracking through a resolution ladder: the largest blob of
/// each non-repelling cycle through infinity, the components of attracting
/// cycle points, and the components of finite critical points attracted to a
/// cycle together with their first images around that cycle.
inline std::vector<ComponentAnchor> default_anchors(const RationalMap& map, std::span<const Cycle> cycles,
                                                    const OrbitOptions& opt = {}) {
  std::vector<ComponentAnchor> out;
  for (const auto& c : cycles) {
    if (c.cls.is_repelling() || !c.contains_infinity()) continue;
    for (int j = 0; j < c.period(); ++j) {
      if (c.points[static_cast<std::size_t>(j)].is_infinity()) {
        out.push_back({"cycle" + std::to_string(c.id) + "@inf", std::nullopt, c.id, j});
      }
    }
  }
  for (const auto& c : cycles) {
    if (!c.cls.is_attracting()) continue;
    for (int j = 0; j < c.period(); ++j) {
      const auto& p = c.points[static_cast<std::size_t>(j)];
      if (p.is_infinity()) continue;
      out.push_back({"cycle" + std::to_string(c.id) + "[" + std::to_string(j) + "]", p.value(), c.id, j});
    }
  }
  const OrbitClassifier classifier(map, cycles, opt);
  int crit_index = 0;
  for (const auto& r : critical_points(map).roots) {
    if (r.point.is_infinity()) continue;
    const int ci = crit_index++;
    const auto res = classifier.classify(r.point);
    if (res.fate == OrbitFate::unresolved || res.fate == OrbitFate::landed) continue;
    const auto& cyc = cycles[static_cast<std::size_t>(res.cycle_id)];
    const int stride = cyc.period() * std::max(1, cyc.cls.parabolic_order);
    SpherePoint z = r.point;
    for (int s = 0; s < stride; ++s) {
      if (z.is_finite()) {
        out.push_back({"crit" + std::to_string(ci) + "+" + std::to_string(s), z.value(), res.cycle_id,
                       classifier.advance_phase(res.cycle_id, res.phase, s)});
      }
      z = map(z);
    }
  }
  return out;
}

struct DichotomyRung {
  const FatouAtlas* atlas = nullptr;
  double epsilon = 0.0;
};

struct DichotomyEntry {
  std::string anchor;
  int cycle_id = -1;
  int phase = 0;
  std::vector<int> component_ids;  // per rung
  std::vector<MeasureEstimate> estimates;
  DichotomyVerdict verdict = DichotomyVerdict::ambiguous;
};

struct DichotomyReport {
  std::vector<DichotomyEntry> entries;
  std::vector<MeasureEstimate> residual;  // per rung
  std::vector<double> unresolved_fraction;
  std::vector<std::string> warnings;

  int count(DichotomyVerdict v) const {
    return static_cast<int>(
        std::count_if(entries.begin(), entries.end(), [v](const DichotomyEntry& e) { return e.verdict == v; }));
  }
};

inline DichotomyVerdict dichotomy_verdict(std::span<const MeasureEstimate> ladder) {
  const bool all_high =
      std::all_of(ladder.begin(), ladder.end(), [](const MeasureEstimate& e) { return e.estimate >= 0.99; });
  if (all_high) return DichotomyVerdict::boundary_is_j_candidate;
  bool decreasing = true;
  for (std::size_t i = 1; i < ladder.size(); ++i) decreasing = decreasing && ladder[i].estimate < ladder[i - 1].estimate;
  if (decreasing && ladder.back().estimate < 0.2) return DichotomyVerdict::measure_zero_candidate;
  return DichotomyVerdict::ambiguous;
}

/// Runs boundary_measure for each anchored component down a ladder of
/// (atlas, epsilon) rungs with strictly decreasing epsilon, and assigns the
/// verdicts. Anchors resolving to the same component in the finest atlas are
/// merged; anchors that fail to resolve in some rung are reported in warnings.
inline DichotomyReport dichotomy_report(const MMESampleSet& samples, std::span<const DichotomyRung> rungs,
                                        std::span<const ComponentAnchor> anchors) {
  if (rungs.size() < 3) throw PreconditionViolation("dichotomy_report: need at least 3 rungs");
  for (std::size_t i = 1; i < rungs.size(); ++i) {
    if (!(rungs[i].epsilon < rungs[i - 1].epsilon)) {
      throw PreconditionViolation("dichotomy_report: epsilon ladder must be strictly decreasing");
    }
  }
  DichotomyReport rep;
  const FatouAtlas& finest = *rungs.back().atlas;
  std::vector<std::uint32_t> finest_seen;
  std::vector<std::vector<std::uint32_t>> ids_per_rung(rungs.size());
  for (const auto& a : anchors) {
    DichotomyEntry e;
    e.anchor = a.name;
    e.cycle_id = a.cycle_id;
    e.phase = a.phase;
    bool ok = true;
    for (const auto& r : rungs) {
      const auto id = resolve_anchor(*r.atlas, a);
      if (!id) {
        ok = false;
        break;
      }
      e.component_ids.push_back(static_cast<int>(*id));
    }
    if (!ok) {
      rep.warnings.push_back("anchor " + a.name + " does not resolve to a component at every rung");
      continue;
    }
    const auto fid = static_cast<std::uint32_t>(e.component_ids.back());
    if (std::find(finest_seen.begin(), finest_seen.end(), fid) != finest_seen.end()) continue;
    finest_seen.push_back(fid);
    rep.entries.push_back(std::move(e));
  }
  for (std::size_t k = 0; k < rungs.size(); ++k) {
    std::vector<std::uint32_t> ids;
    for (const auto& e : rep.entries) ids.push_back(static_cast<std::uint32_t>(e.component_ids[k]));
    const auto c = count_near_components(samples, *rungs[k].atlas, ids, rungs[k].epsilon);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      rep.entries[i].estimates.push_back(
          detail::make_estimate(static_cast<int>(ids[i]), rungs[k].epsilon, c.hits[i], c.n, c.excluded));
    }
    rep.residual.push_back(detail::make_estimate(kResidual, rungs[k].epsilon, c.residual, c.n, c.excluded));
    rep.unresolved_fraction.push_back(rungs[k].atlas->unresolved_fraction());
  }
  for (auto& e : rep.entries) e.verdict = dichotomy_verdict(e.estimates);
  const int j_candidates = rep.count(DichotomyVerdict::boundary_is_j_candidate);
  if (j_candidates > 1 && finest.component_count() != 2) {
    rep.warnings.push_back(std::to_string(j_candidates) +
                           " components have boundary carrying full measure; at most one is expected");
  }
  return rep;
}

enum class CriticalDisposition { f_attracted, j_eventually_periodic, parabolic_attracted, undetermined };

inline std::string to_string(CriticalDisposition d) {
  switch (d) {
    case CriticalDisposition::f_attracted: return "F_ATTRACTED";
    case CriticalDisposition::j_eventually_periodic: return "J_EVENTUALLY_PERIODIC";
    case CriticalDisposition::parabolic_attracted: return "PARABOLIC_ATTRACTED";
    case CriticalDisposition::undetermined: return "UNDETERMINED";
  }
  return "?";
}

enum class MapVerdict { hyperbolic, subhyperbolic, geometrically_finite, undetermined };

inline std::string to_string(MapVerdict v) {
  switch (v) {
    case MapVerdict::hyperbolic: return "HYPERBOLIC";
    case MapVerdict::subhyperbolic: return "SUBHYPERBOLIC";
    case MapVerdict::geometrically_finite: return "GEOMETRICALLY_FINITE";
    case MapVerdict::undetermined: return "UNDETERMINED";
  }
  return "?";
}

struct CriticalRecord {
  SpherePoint point;
  int multiplicity = 1;
  CriticalDisposition disposition = CriticalDisposition::undetermined;
  int cycle_id = -1;
  int iterations = 0;
  bool escaping = false;  // polynomial only: attracted to infinity
};

struct MapClassification {
  MapVerdict verdict = MapVerdict::undetermined;
  std::vector<CriticalRecord> critical;

  bool is_hyperbolic() const noexcept { return verdict == MapVerdict::hyperbolic; }
  bool is_subhyperbolic() const noexcept { return is_hyperbolic() || verdict == MapVerdict::subhyperbolic; }
  bool is_geometrically_finite() const noexcept {
    return is_subhyperbolic() || verdict == MapVerdict::geometrically_finite;
  }
  int escaping_count() const {
    return static_cast<int>(
        std::count_if(critical.begin(), critical.end(), [](const CriticalRecord& r) { return r.escaping; }));
  }
};

/// Follows every critical orbit and reports the strongest of HYPERBOLIC,
/// SUBHYPERBOLIC, GEOMETRICALLY_FINITE the dispositions allow. A critical
/// point attracted to a parabolic cycle rules out the first two.
inline MapClassification classify_map(const RationalMap& map, std::span<const Cycle> cycles, int max_iter = 2000) {
  OrbitOptions opt;
  opt.max_iter = max_iter;
  opt.landing_tolerance = 1e-9;
  const OrbitClassifier classifier(map, cycles, opt);
  MapClassification out;
  for (const auto& r : critical_points(map).roots) {
    CriticalRecord rec;
    rec.point = r.point;
    rec.multiplicity = r.multiplicity;
    const auto res = classifier.classify(r.point);
    rec.cycle_id = res.cycle_id;
    rec.iterations = res.iterations;
    switch (res.fate) {
      case OrbitFate::attracted: rec.disposition = CriticalDisposition::f_attracted; break;
      case OrbitFate::landed: rec.disposition = CriticalDisposition::j_eventually_periodic; break;
      case OrbitFate::parabolic: rec.disposition = CriticalDisposition::parabolic_attracted; break;
      case OrbitFate::unresolved: rec.disposition = CriticalDisposition::undetermined; break;
    }
    rec.escaping = map.is_polynomial() && r.point.is_finite() && res.cycle_id >= 0 &&
                   cycles[static_cast<std::size_t>(res.cycle_id)].contains_infinity();
    out.critical.push_back(rec);
  }
  auto any = [&](CriticalDisposition d) {
    return std::any_of(out.critical.begin(), out.critical.end(),
                       [d](const CriticalRecord& r) { return r.disposition == d; });
  };
  if (any(CriticalDisposition::undetermined)) {
    out.verdict = MapVerdict::undetermined;
  } else if (any(CriticalDisposition::parabolic_attracted)) {
    out.verdict = MapVerdict::geometrically_finite;
  } else if (any(CriticalDisposition::j_eventually_periodic)) {
    out.verdict = MapVerdict::subhyperbolic;
  } else {
    out.verdict = MapVerdict::hyperbolic;
  }
  return out;
}

}  // namespace mmelab
