#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmelab/atlas.hpp"
#include "mmelab/config.hpp"
#include "mmelab/cycles.hpp"
#include "mmelab/measure.hpp"
#include "mmelab/parallel.hpp"
#include "mmelab/rays.hpp"
#include "mmelab/sampler.hpp"

namespace mmelab {

using json = nlohmann::ordered_json;

/// Overrides applied on top of a config, as given on the command line.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> resolution;
  std::optional<std::int64_t> n;
};

inline ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOverrides& o) {
  if (o.seed) cfg.rng_seed = *o.seed;
  if (o.resolution) cfg.resolution = *o.resolution;
  if (o.n) cfg.n_samples = *o.n;
  return cfg;
}

struct RayOutcome {
  std::string angle;
  RayTrace trace;
};

struct PairOutcome {
  std::string a;
  std::string b;
  ColandingVerdict verdict = ColandingVerdict::undecided;
  std::optional<cplx> point;
  std::optional<CutPointCheck> cut;
};

struct GrandOrbitOutcome {
  int cycle_id = -1;
  std::vector<std::string> anchors;
  std::vector<std::uint32_t> components;
  std::optional<GrandOrbitResult> result;
  std::string error;
};

/// Everything an analysis run produces; the report is a view of this.
struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Cycle> cycles;
  MapClassification classification;
  std::optional<FatouAtlas> atlas;  // at config.resolution
  MMESampleSet samples;
  MMESampleSet replica;  // second rng seed
  std::vector<InvarianceStatistic> invariance;
  double support = 0.0;
  std::size_t support_probes = 0;
  DichotomyReport dichotomy;
  DichotomyReport dichotomy_replica;
  std::vector<bool> replica_overlap;  // per dichotomy entry: all rungs overlap
  MeasureEstimate residual;
  std::vector<GrandOrbitOutcome> grand_orbits;
  std::map<std::uint32_t, InvarianceProbeResult> complete_invariance;
  std::optional<ConnectivityResult> connectivity;
  std::vector<RayOutcome> rays;
  std::vector<PairOutcome> pairs;
  std::vector<std::string> warnings;
  std::map<std::string, double> timings;
  int exit_code = 0;
};

namespace detail {

inline json point_json(const SpherePoint& p) {
  if (p.is_infinity()) return "inf";
  return json::array({p.value().real(), p.value().imag()});
}

inline json point_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json estimate_json(const MeasureEstimate& e) {
  json j;
  j["component"] = e.component_id == kResidual ? json("RESIDUAL") : json(e.component_id);
  j["epsilon"] = e.epsilon;
  j["estimate"] = e.estimate;
  j["ci95"] = json::array({e.ci_lo, e.ci_hi});
  j["n"] = e.n;
  j["excluded"] = e.excluded;
  return j;
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace detail

struct RunOptions {
  bool ladder = true;  // dichotomy ladder, replica and grand-orbit checks
  bool rays = true;
};

/// Full pipeline: cycles, classification, atlases, samples, measures, rays.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& ro = {}) {
  ExperimentResult res;
  res.config = cfg;
  detail::Stopwatch sw;
  const RationalMap map = cfg.map();

  res.cycles = find_cycles(map, cfg.k_max);
  res.classification = classify_map(map, res.cycles, cfg.max_iter);
  res.timings["cycles_and_classification"] = sw.lap();

  OrbitOptions oo;
  oo.max_iter = cfg.max_iter;
  const GridWindow window{cfg.center, cfg.half_width, cfg.resolution};
  res.atlas.emplace(build_atlas(map, window, res.cycles, oo));
  const FatouAtlas& atlas = *res.atlas;
  res.timings["atlas"] = sw.lap();

  const SpherePoint seed = default_seed(map, res.cycles);
  const auto n = static_cast<std::size_t>(cfg.n_samples);
  res.samples = sample_backward(map, seed, cfg.burn_in, n, cfg.rng_seed);
  res.timings["sampler"] = sw.lap();
  if (n >= 10000) res.invariance = invariance_check(res.samples, map);
  std::vector<SpherePoint> probes;
  for (const auto& c : res.cycles) {
    if (!c.cls.is_repelling()) continue;
    for (const auto& p : c.points) {
      if (p.is_finite()) probes.push_back(p);
    }
  }
  res.support_probes = probes.size();
  res.support = support_coverage(res.samples, probes, 0.02);
  res.residual = residual_mass(res.samples, atlas, cfg.residual_epsilon);
  if (atlas.unresolved_fraction() > 0.01) {
    res.warnings.push_back("unresolved cells make up " + format_double(100.0 * atlas.unresolved_fraction()) +
                           "% of the main atlas");
  }

  const auto anchors = default_anchors(map, res.cycles, oo);
  if (ro.ladder) {
    std::vector<FatouAtlas> ladder;
    ladder.reserve(cfg.ladder_resolutions.size());
    std::vector<DichotomyRung> rungs;
    for (std::size_t i = 0; i < cfg.ladder_resolutions.size(); ++i) {
      const int r = cfg.ladder_resolutions[i];
      if (r == cfg.resolution) {
        rungs.push_back({&atlas, cfg.epsilons[i]});
      } else {
        ladder.push_back(build_atlas(map, GridWindow{cfg.center, cfg.half_width, r}, res.cycles, oo));
        rungs.push_back({&ladder.back(), cfg.epsilons[i]});
      }
    }
    res.timings["ladder_atlases"] = sw.lap();
    res.replica = sample_backward(map, seed, cfg.burn_in, n, cfg.second_seed);
    res.dichotomy = dichotomy_report(res.samples, rungs, anchors);
    res.dichotomy_replica = dichotomy_report(res.replica, rungs, anchors);
    for (std::size_t i = 0; i < res.dichotomy.entries.size(); ++i) {
      bool ok = i < res.dichotomy_replica.entries.size();
      for (std::size_t k = 0; ok && k < rungs.size(); ++k) {
        ok = intervals_overlap(res.dichotomy.entries[i].estimates[k], res.dichotomy_replica.entries[i].estimates[k]);
      }
      res.replica_overlap.push_back(ok);
      if (!ok) res.warnings.push_back("replica seed disagrees for anchor " + res.dichotomy.entries[i].anchor);
    }
    for (const auto& w : res.dichotomy.warnings) res.warnings.push_back(w);
    res.timings["dichotomy"] = sw.lap();

    // Cycles of bounded anchored components, one per attracting or parabolic
    // cycle of the map.
    std::map<int, GrandOrbitOutcome> groups;
    for (const auto& a : anchors) {
      const auto id = resolve_anchor(atlas, a);
      if (!id || !atlas.component(*id).bounded) continue;
      auto& g = groups[a.cycle_id];
      g.cycle_id = a.cycle_id;
      if (std::find(g.components.begin(), g.components.end(), *id) != g.components.end()) continue;
      g.components.push_back(*id);
      g.anchors.push_back(a.name);
    }
    for (auto& [cid, g] : groups) {
      try {
        g.result = grand_orbit_equality(map, res.samples, atlas, g.components, cfg.residual_epsilon);
        if (!g.result->pass) res.warnings.push_back("grand orbit equality fails for cycle " + std::to_string(cid));
      } catch (const PreconditionViolation& e) {
        g.error = e.what();
        res.warnings.push_back("grand orbit check skipped for cycle " + std::to_string(cid) + ": " + e.what());
      }
      res.grand_orbits.push_back(g);
    }
    res.timings["grand_orbit"] = sw.lap();
  }

  std::set<std::uint32_t> checked;
  for (const auto& a : anchors) {
    const auto id = resolve_anchor(atlas, a);
    if (!id || !checked.insert(*id).second) continue;
    try {
      res.complete_invariance[*id] = complete_invariance_check(map, atlas, *id, cfg.invariance_probes);
    } catch (const PreconditionViolation& e) {
      res.warnings.push_back("complete invariance not checked for component " + std::to_string(*id) + ": " +
                             e.what());
    }
  }
  res.timings["complete_invariance"] = sw.lap();

  if (map.is_polynomial()) {
    res.connectivity = connectivity_of_J_polynomial(map, cfg.max_iter);
    if (ro.rays && res.connectivity->verdict == Connectivity::connected) {
      for (const auto& s : cfg.ray_angles) res.rays.push_back({s, trace_ray(map, Angle::parse(s))});
      for (const auto& [a, b] : cfg.ray_pairs) {
        auto cp = colanding_pair(map, Angle::parse(a), Angle::parse(b));
        PairOutcome po{a, b, cp.verdict, cp.point, std::nullopt};
        if (cp.verdict == ColandingVerdict::coland) po.cut = cut_point_check(atlas, cp.ray0, cp.ray1, *cp.point);
        res.pairs.push_back(po);
      }
    } else if (ro.rays && (!cfg.ray_angles.empty() || !cfg.ray_pairs.empty())) {
      res.warnings.push_back("rays skipped: Julia set is " + to_string(res.connectivity->verdict));
    }
  } else if (ro.rays && (!cfg.ray_angles.empty() || !cfg.ray_pairs.empty())) {
    res.warnings.push_back("rays skipped: map is not a polynomial");
  }
  res.timings["rays"] = sw.lap();

  bool undecided = res.classification.verdict == MapVerdict::undetermined;
  for (const auto& e : res.dichotomy.entries) undecided = undecided || e.verdict == DichotomyVerdict::ambiguous;
  for (const auto& p : res.pairs) undecided = undecided || p.verdict == ColandingVerdict::undecided;
  res.exit_code = undecided ? 2 : 0;
  return res;
}

/// Deterministic report: identical configs give identical reports.
inline json report_json(const ExperimentResult& r) {
  json j;
  const auto& cfg = r.config;
  const RationalMap map = cfg.map();
  json m;
  m["name"] = cfg.name;
  m["num"] = json::array();
  for (const auto& c : cfg.num) m["num"].push_back(detail::point_json(c));
  m["den"] = json::array();
  for (const auto& c : cfg.den) m["den"].push_back(detail::point_json(c));
  m["degree"] = map.degree();
  m["polynomial"] = map.is_polynomial();
  j["map"] = m;

  json cl;
  cl["verdict"] = to_string(r.classification.verdict);
  cl["critical"] = json::array();
  for (const auto& c : r.classification.critical) {
    json e;
    e["point"] = detail::point_json(c.point);
    e["multiplicity"] = c.multiplicity;
    e["disposition"] = to_string(c.disposition);
    e["cycle"] = c.cycle_id;
    e["iterations"] = c.iterations;
    if (map.is_polynomial()) e["escaping"] = c.escaping;
    cl["critical"].push_back(e);
  }
  j["classification"] = cl;

  j["cycles"] = json::array();
  for (const auto& c : r.cycles) {
    json e;
    e["id"] = c.id;
    e["period"] = c.period();
    e["class"] = to_string(c.cls);
    e["multiplier"] = detail::point_json(c.multiplier);
    e["points"] = json::array();
    for (const auto& p : c.points) e["points"].push_back(detail::point_json(p));
    j["cycles"].push_back(e);
  }

  const FatouAtlas& atlas = *r.atlas;
  j["components"] = json::array();
  for (std::uint32_t id = 0; id < atlas.component_count(); ++id) {
    const auto& c = atlas.component(id);
    j["components"].push_back({{"id", id},
                               {"cycle", c.cycle_id},
                               {"phase", c.phase},
                               {"blob", c.blob},
                               {"bounded", c.bounded},
                               {"cells", c.cells}});
  }

  j["estimates"] = json::array();
  for (const auto& e : r.dichotomy.entries) {
    for (std::size_t k = 0; k < e.estimates.size(); ++k) {
      auto ej = detail::estimate_json(e.estimates[k]);
      ej["anchor"] = e.anchor;
      ej["resolution"] = cfg.ladder_resolutions[k];
      j["estimates"].push_back(ej);
    }
  }
  j["residual"] = json::array();
  {
    auto ej = detail::estimate_json(r.residual);
    ej["resolution"] = cfg.resolution;
    j["residual"].push_back(ej);
  }
  for (std::size_t k = 0; k < r.dichotomy.residual.size(); ++k) {
    auto ej = detail::estimate_json(r.dichotomy.residual[k]);
    ej["resolution"] = cfg.ladder_resolutions[k];
    j["residual"].push_back(ej);
  }

  j["dichotomy"] = json::array();
  for (std::size_t i = 0; i < r.dichotomy.entries.size(); ++i) {
    const auto& e = r.dichotomy.entries[i];
    json d;
    d["anchor"] = e.anchor;
    d["cycle"] = e.cycle_id;
    d["phase"] = e.phase;
    d["components"] = e.component_ids;
    d["estimates"] = json::array();
    for (const auto& est : e.estimates) d["estimates"].push_back(est.estimate);
    if (i < r.dichotomy_replica.entries.size()) {
      d["replica_estimates"] = json::array();
      for (const auto& est : r.dichotomy_replica.entries[i].estimates) d["replica_estimates"].push_back(est.estimate);
      d["replica_overlap"] = bool(r.replica_overlap[i]);
    }
    d["verdict"] = to_string(e.verdict);
    j["dichotomy"].push_back(d);
  }
  j["warnings"] = r.warnings;

  json x;
  x["unresolved_fraction"] = atlas.unresolved_fraction();
  x["ladder_unresolved_fraction"] = r.dichotomy.unresolved_fraction;
  x["sampler"] = {{"seed_point", detail::point_json(r.samples.seed_point)},
                  {"burn_in", r.samples.burn_in},
                  {"n", r.samples.n},
                  {"rng_seed", r.samples.rng_seed},
                  {"replica_rng_seed", r.replica.rng_seed},
                  {"map_fingerprint", r.samples.map_fingerprint}};
  x["invariance"] = json::array();
  for (const auto& s : r.invariance) {
    x["invariance"].push_back({{"function", s.name}, {"delta", s.delta}, {"threshold", s.threshold}, {"pass", s.pass()}});
  }
  x["support_coverage"] = {{"probes", r.support_probes}, {"radius", 0.02}, {"fraction", r.support}};
  x["grand_orbit"] = json::array();
  for (const auto& g : r.grand_orbits) {
    json e;
    e["cycle"] = g.cycle_id;
    e["anchors"] = g.anchors;
    e["components"] = g.components;
    if (g.result) {
      e["pass"] = g.result->pass;
      e["max_difference"] = g.result->max_difference;
      e["estimates"] = json::array();
      for (const auto& est : g.result->estimates) e["estimates"].push_back(detail::estimate_json(est));
    } else {
      e["pass"] = nullptr;
      e["error"] = g.error;
    }
    x["grand_orbit"].push_back(e);
  }
  x["complete_invariance"] = json::array();
  for (const auto& [id, ci] : r.complete_invariance) {
    x["complete_invariance"].push_back({{"component", id},
                                        {"bounded", atlas.component(id).bounded},
                                        {"probes", ci.probes},
                                        {"forward_failures", ci.forward_failures},
                                        {"backward_failures", ci.backward_failures},
                                        {"pass", ci.pass}});
  }
  if (r.connectivity) {
    json c;
    c["verdict"] = to_string(r.connectivity->verdict);
    c["escaping_critical"] = r.connectivity->escaping_count();
    x["connectivity"] = c;
  }
  x["rays"] = json::array();
  for (const auto& ray : r.rays) {
    json e;
    e["angle"] = ray.angle;
    e["status"] = to_string(ray.trace.status);
    e["samples"] = ray.trace.samples.size();
    if (ray.trace.landing_point) e["landing"] = detail::point_json(*ray.trace.landing_point);
    x["rays"].push_back(e);
  }
  x["ray_pairs"] = json::array();
  for (const auto& p : r.pairs) {
    json e;
    e["angles"] = json::array({p.a, p.b});
    e["verdict"] = to_string(p.verdict);
    if (p.point) e["point"] = detail::point_json(*p.point);
    if (p.cut) {
      e["cut_point"] = {{"probes", json::array({detail::point_json(p.cut->probe_a), detail::point_json(p.cut->probe_b)})},
                        {"components", json::array({p.cut->component_a ? json(*p.cut->component_a) : json(nullptr),
                                                    p.cut->component_b ? json(*p.cut->component_b) : json(nullptr)})},
                        {"separated", p.cut->separated}};
    }
    x["ray_pairs"].push_back(e);
  }
  j["extras"] = x;
  return j;
}

/// Run metadata kept apart from the report: wall clock, timings, threads.
inline json metadata_json(const ExperimentResult& r) {
  json j;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["timestamp"] = buf;
  j["threads"] = thread_count();
  j["timings_seconds"] = r.timings;
  j["exit_code"] = r.exit_code;
  return j;
}

/// One row of the fixtures summary.
struct FixtureSummary {
  std::string name;
  std::string classification;
  std::size_t components = 0;
  std::vector<std::string> j_candidates;
  std::vector<std::string> measure_zero;
  std::vector<std::string> ambiguous;
  std::string grand_orbit;  // PASS, FAIL or n/a
  int exit_code = 0;
};

inline FixtureSummary summarize(const ExperimentResult& r) {
  FixtureSummary s;
  s.name = r.config.name;
  s.classification = to_string(r.classification.verdict);
  s.components = r.atlas ? r.atlas->component_count() : 0;
  for (const auto& e : r.dichotomy.entries) {
    if (e.verdict == DichotomyVerdict::boundary_is_j_candidate) s.j_candidates.push_back(e.anchor);
    if (e.verdict == DichotomyVerdict::measure_zero_candidate) s.measure_zero.push_back(e.anchor);
    if (e.verdict == DichotomyVerdict::ambiguous) s.ambiguous.push_back(e.anchor);
  }
  bool any = false, all = true;
  for (const auto& g : r.grand_orbits) {
    if (g.components.size() < 2) continue;
    any = true;
    all = all && g.result && g.result->pass;
  }
  s.grand_orbit = any ? (all ? "PASS" : "FAIL") : "n/a";
  s.exit_code = r.exit_code;
  return s;
}

}  // namespace mmelab
