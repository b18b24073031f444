#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmelab/cycles.hpp"
#include "mmelab/errors.hpp"
#include "mmelab/parallel.hpp"
#include "mmelab/rational_map.hpp"
#include "mmelab/rng.hpp"
#include "mmelab/sphere.hpp"

namespace mmelab {

/// Square planar window; cell (ix, iy) is row-major with row 0 at the top.
struct GridWindow {
  cplx center{};
  double half_width = 2.0;
  int resolution = 512;

  double cell_size() const noexcept { return 2.0 * half_width / resolution; }

  std::size_t cell_count() const noexcept {
    return static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
  }

  cplx cell_center(int ix, int iy) const noexcept {
    const double cs = cell_size();
    return center + cplx{-half_width + (ix + 0.5) * cs, half_width - (iy + 0.5) * cs};
  }

  cplx cell_center(std::size_t idx) const noexcept {
    const auto n = static_cast<std::size_t>(resolution);
    return cell_center(static_cast<int>(idx % n), static_cast<int>(idx / n));
  }

  bool contains(cplx z) const noexcept {
    return std::abs(z.real() - center.real()) <= half_width && std::abs(z.imag() - center.imag()) <= half_width;
  }

  /// Distance from z to the nearest window edge (negative outside).
  double margin(cplx z) const noexcept {
    return half_width - std::max(std::abs(z.real() - center.real()), std::abs(z.imag() - center.imag()));
  }

  std::optional<std::pair<int, int>> cell_of(cplx z) const noexcept {
    if (!contains(z)) return std::nullopt;
    const double cs = cell_size();
    int ix = static_cast<int>(std::floor((z.real() - (center.real() - half_width)) / cs));
    int iy = static_cast<int>(std::floor((center.imag() + half_width - z.imag()) / cs));
    ix = std::clamp(ix, 0, resolution - 1);
    iy = std::clamp(iy, 0, resolution - 1);
    return std::pair{ix, iy};
  }

  std::optional<std::size_t> cell_index(cplx z) const noexcept {
    const auto c = cell_of(z);
    if (!c) return std::nullopt;
    return static_cast<std::size_t>(c->second) * static_cast<std::size_t>(resolution) +
           static_cast<std::size_t>(c->first);
  }

  friend bool operator==(const GridWindow&, const GridWindow&) = default;
};

struct OrbitOptions {
  int max_iter = 2000;
  double attract_tolerance = 1e-6;  // chordal
  // Chordal radius inside which a monotone approach to a parabolic cycle
  // counts as convergence.
  double parabolic_tolerance = 5e-2;
  int monotone_window = 100;  // consecutive decreasing returns (in steps of k*m)
  double escape_radius = 1e6;
  // > 0 enables detection of orbits that land exactly on a repelling or
  // parabolic cycle (used for critical orbits).
  double landing_tolerance = 0.0;
};

enum class OrbitFate { attracted, parabolic, landed, unresolved };

struct OrbitResult {
  OrbitFate fate = OrbitFate::unresolved;
  int cycle_id = -1;
  int phase = 0;
  int iterations = 0;
};

struct OrbitLabel {
  int cycle_id = -1;
  int phase = 0;
  friend bool operator==(const OrbitLabel&, const OrbitLabel&) = default;
};

namespace detail {

// Local picture of a parabolic cycle: at each cycle point p_i, R^s with s the
// petal-return stride reads g(u) = R^s(p_i + u) - (p_i + u) = a u^(q+1) + ...
// in the chart of p_i. Its q attracting directions satisfy a u^q < 0.
struct PetalFrame {
  Chart chart = Chart::direct;
  cplx center{};  // p_i in its chart
  cplx a{};
  int q = 1;
  double theta0 = 0.0;  // argument of attracting direction 0

  int petal_of(cplx u) const {
    const double step = 2.0 * std::numbers::pi / q;
    const long j = std::lround((std::arg(u) - theta0) / step);
    return static_cast<int>(((j % q) + q) % q);
  }
  cplx direction(int j) const { return std::polar(1.0, theta0 + 2.0 * std::numbers::pi * j / q); }
};

inline PetalFrame petal_frame(const RationalMap& map, const SpherePoint& p, int stride) {
  PetalFrame f;
  f.chart = chart_of(p);
  f.center = to_chart(p, f.chart);
  constexpr int kSamples = 64;
  constexpr double h = 1e-2;
  std::vector<cplx> g(kSamples);
  for (int t = 0; t < kSamples; ++t) {
    const cplx x = f.center + std::polar(h, 2.0 * std::numbers::pi * t / kSamples);
    SpherePoint y = from_chart(x, f.chart);
    for (int s = 0; s < stride; ++s) y = map(y);
    g[static_cast<std::size_t>(t)] = (y.is_infinity() && f.chart == Chart::direct) ? cplx{} : to_chart(y, f.chart) - x;
  }
  // Fourier coefficients of g on the circle |u| = h are a_l h^l.
  std::vector<cplx> coef(kSamples / 2);
  double biggest = 0.0;
  for (int l = 0; l < kSamples / 2; ++l) {
    cplx acc{};
    for (int t = 0; t < kSamples; ++t) {
      acc += g[static_cast<std::size_t>(t)] * std::polar(1.0, -2.0 * std::numbers::pi * l * t / kSamples);
    }
    coef[static_cast<std::size_t>(l)] = acc / static_cast<double>(kSamples);
    if (l >= 2) biggest = std::max(biggest, std::abs(coef[static_cast<std::size_t>(l)]));
  }
  for (int l = 2; l < kSamples / 2; ++l) {
    if (std::abs(coef[static_cast<std::size_t>(l)]) >= 0.1 * biggest) {
      f.q = l - 1;
      f.a = coef[static_cast<std::size_t>(l)] / std::pow(h, l);
      break;
    }
  }
  f.theta0 = (std::numbers::pi - std::arg(f.a)) / f.q;
  return f;
}

}  // namespace detail

/// Forward-orbit classifier against a fixed list of cycles. The phase of a
/// start point is the index of the cycle point it approaches, shifted back by
/// the number of iterations taken (mod the period). Parabolic cycles are
/// labeled per petal: the petals are permuted in cycles of length k*m and the
/// phase runs over all of them, so distinct petals of one cycle never share a
/// label.
class OrbitClassifier {
 public:
  OrbitClassifier(const RationalMap& map, std::span<const Cycle> cycles, OrbitOptions opt = {})
      : map_(&map), opt_(opt) {
    for (const auto& c : cycles) {
      const int k = c.period();
      if (c.cls.is_attracting()) {
        for (int j = 0; j < k; ++j) attracting_.push_back({c.points[static_cast<std::size_t>(j)], c.id, j, k});
      }
      if (c.cls.is_parabolic()) parabolic_.push_back(make_parabolic(c));
      if ((c.cls.is_repelling() || c.cls.is_parabolic()) && opt_.landing_tolerance > 0.0) {
        for (int j = 0; j < k; ++j) landing_.push_back({c.points[static_cast<std::size_t>(j)], c.id, j, k});
      }
      if (c.contains_infinity() && !c.cls.is_repelling() && infinity_cycle_ < 0) {
        infinity_cycle_ = c.id;
        infinity_period_ = k;
        for (int j = 0; j < k; ++j) {
          if (c.points[static_cast<std::size_t>(j)].is_infinity()) infinity_index_ = j;
        }
        if (c.cls.is_parabolic()) infinity_parabolic_ = static_cast<int>(parabolic_.size()) - 1;
      }
      cycles_.push_back(c);
    }
  }

  const OrbitOptions& options() const noexcept { return opt_; }
  std::span<const Cycle> cycles() const noexcept { return cycles_; }

  /// Number of distinct phases a label of this cycle can carry.
  int phase_count(int cycle_id) const {
    for (const auto& pc : parabolic_) {
      if (pc.cycle_id == cycle_id) return pc.petal_cycles * pc.petal_period;
    }
    return cycles_.at(static_cast<std::size_t>(cycle_id)).period();
  }

  /// Phase of R^s(z) given the phase of z.
  int advance_phase(int cycle_id, int phase, int s) const {
    for (const auto& pc : parabolic_) {
      if (pc.cycle_id != cycle_id) continue;
      const int L = pc.petal_period;
      return (phase / L) * L + ((phase % L + s) % L + L) % L;
    }
    const int k = cycles_.at(static_cast<std::size_t>(cycle_id)).period();
    return ((phase + s) % k + k) % k;
  }

  OrbitResult classify(SpherePoint z) const {
    struct ParabolicState {
      std::vector<double> last;  // distance one stride ago, per residue
      std::vector<int> run;      // consecutive decreases, per residue
    };
    std::vector<ParabolicState> state;
    state.reserve(parabolic_.size());
    for (const auto& p : parabolic_) {
      state.push_back({std::vector<double>(static_cast<std::size_t>(p.stride), 0.0),
                       std::vector<int>(static_cast<std::size_t>(p.stride), 0)});
    }
    auto phase = [](int index, int n, int k) { return ((index - n) % k + k) % k; };

    for (int n = 0;; ++n) {
      for (const auto& t : landing_) {
        if (chordal_distance(z, t.point) < opt_.landing_tolerance && stays_on_cycle(z, t)) {
          return {OrbitFate::landed, t.cycle_id, phase(t.index, n, t.period), n};
        }
      }
      for (const auto& t : attracting_) {
        if (chordal_distance(z, t.point) < opt_.attract_tolerance) {
          return {OrbitFate::attracted, t.cycle_id, phase(t.index, n, t.period), n};
        }
      }
      if (infinity_cycle_ >= 0 && z.is_finite() && std::norm(z.value()) > opt_.escape_radius * opt_.escape_radius) {
        if (infinity_parabolic_ >= 0) {
          const auto& pc = parabolic_[static_cast<std::size_t>(infinity_parabolic_)];
          return {OrbitFate::parabolic, infinity_cycle_, petal_phase(pc, infinity_index_, z, n), n};
        }
        return {OrbitFate::attracted, infinity_cycle_, phase(infinity_index_, n, infinity_period_), n};
      }
      for (std::size_t c = 0; c < parabolic_.size(); ++c) {
        const auto& pc = parabolic_[c];
        double dist = std::numeric_limits<double>::infinity();
        int nearest = 0;
        for (int j = 0; j < pc.period; ++j) {
          const double dj = chordal_distance(z, pc.points[static_cast<std::size_t>(j)]);
          if (dj < dist) {
            dist = dj;
            nearest = j;
          }
        }
        auto& st = state[c];
        const auto slot = static_cast<std::size_t>(n % pc.stride);
        if (n >= pc.stride) st.run[slot] = dist < st.last[slot] ? st.run[slot] + 1 : 0;
        st.last[slot] = dist;
        if (dist < opt_.parabolic_tolerance && st.run[slot] >= pc.required_run) {
          return {OrbitFate::parabolic, pc.cycle_id, petal_phase(pc, nearest, z, n), n};
        }
      }
      if (n >= opt_.max_iter) break;
      z = (*map_)(z);
    }
    return {OrbitFate::unresolved, -1, 0, opt_.max_iter};
  }

  std::optional<OrbitLabel> label(const SpherePoint& z) const {
    const auto r = classify(z);
    if (r.fate == OrbitFate::unresolved) return std::nullopt;
    return OrbitLabel{r.cycle_id, r.phase};
  }

 private:
  struct Target {
    SpherePoint point;
    int cycle_id;
    int index;
    int period;
  };
  struct ParabolicTarget {
    int cycle_id;
    int period;
    int stride;        // period * parabolic order: petals return to themselves
    int required_run;  // decreases per residue covering the monotone window
    std::vector<SpherePoint> points;
    std::vector<detail::PetalFrame> frames;  // per cycle point
    // Petal (i, j) sits at position pos[i][j] of petal cycle which[i][j].
    std::vector<std::vector<int>> which;
    std::vector<std::vector<int>> pos;
    int petal_cycles = 1;
    int petal_period = 1;
  };

  ParabolicTarget make_parabolic(const Cycle& c) const {
    ParabolicTarget pc;
    pc.cycle_id = c.id;
    pc.period = c.period();
    pc.stride = c.period() * std::max(1, c.cls.parabolic_order);
    pc.required_run = (opt_.monotone_window + pc.stride - 1) / pc.stride;
    pc.points = c.points;
    for (const auto& p : c.points) pc.frames.push_back(detail::petal_frame(*map_, p, pc.stride));
    const int k = pc.period;
    // Where R sends each attracting direction.
    std::vector<std::vector<int>> next(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      const auto& f = pc.frames[static_cast<std::size_t>(i)];
      const auto& g = pc.frames[static_cast<std::size_t>((i + 1) % k)];
      for (int j = 0; j < f.q; ++j) {
        const SpherePoint y = (*map_)(from_chart(f.center + 1e-5 * f.direction(j), f.chart));
        const cplx v = (y.is_infinity() && g.chart == Chart::direct) ? cplx{} : to_chart(y, g.chart) - g.center;
        next[static_cast<std::size_t>(i)].push_back(std::min(g.petal_of(v), g.q - 1));
      }
    }
    pc.which.assign(static_cast<std::size_t>(k), {});
    pc.pos.assign(static_cast<std::size_t>(k), {});
    for (int i = 0; i < k; ++i) {
      pc.which[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(pc.frames[static_cast<std::size_t>(i)].q), -1);
      pc.pos[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(pc.frames[static_cast<std::size_t>(i)].q), 0);
    }
    int cycles = 0;
    int longest = 1;
    for (int j0 = 0; j0 < pc.frames[0].q; ++j0) {
      if (pc.which[0][static_cast<std::size_t>(j0)] >= 0) continue;
      int i = 0, j = j0, len = 0;
      while (pc.which[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] < 0) {
        pc.which[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = cycles;
        pc.pos[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = len++;
        const int jn = next[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        i = (i + 1) % k;
        j = jn;
      }
      longest = std::max(longest, len);
      ++cycles;
    }
    // Petals not reached from point 0 would mean an inconsistent local
    // picture; fold them into cycle 0 by cycle-point index.
    for (int i = 0; i < k; ++i) {
      for (auto& w : pc.which[static_cast<std::size_t>(i)]) {
        if (w < 0) w = 0;
      }
    }
    pc.petal_cycles = std::max(1, cycles);
    pc.petal_period = longest;
    return pc;
  }

  int petal_phase(const ParabolicTarget& pc, int index, const SpherePoint& z, int n) const {
    const auto& f = pc.frames[static_cast<std::size_t>(index)];
    const cplx u = to_chart(z, f.chart) - f.center;
    const int j = f.petal_of(u);
    const int L = pc.petal_period;
    const int w = pc.which[static_cast<std::size_t>(index)][static_cast<std::size_t>(j)];
    const int p = pc.pos[static_cast<std::size_t>(index)][static_cast<std::size_t>(j)];
    return w * L + ((p - n) % L + L) % L;
  }

  bool stays_on_cycle(SpherePoint z, const Target& t) const {
    const auto& pts = cycles_[static_cast<std::size_t>(t.cycle_id)].points;
    for (int s = 1; s <= 3 * t.period; ++s) {
      z = (*map_)(z);
      const auto& expect = pts[static_cast<std::size_t>((t.index + s) % t.period)];
      if (chordal_distance(z, expect) > 1e-6) return false;
    }
    return true;
  }

  const RationalMap* map_;
  OrbitOptions opt_;
  std::vector<Cycle> cycles_;
  std::vector<Target> attracting_;
  std::vector<Target> landing_;
  std::vector<ParabolicTarget> parabolic_;
  int infinity_cycle_ = -1;
  int infinity_period_ = 1;
  int infinity_index_ = 0;
  int infinity_parabolic_ = -1;
};

/// (cycle id, phase) of the cycle the forward orbit of z converges to, or
/// nullopt when the budget runs out first.
inline std::optional<OrbitLabel> classify_orbit(const RationalMap& map, const SpherePoint& z,
                                                std::span<const Cycle> cycles, int max_iter = 2000) {
  OrbitOptions opt;
  opt.max_iter = max_iter;
  return OrbitClassifier(map, cycles, opt).label(z);
}

struct ComponentInfo {
  int cycle_id = -1;
  int phase = 0;
  int blob = 0;
  bool bounded = false;
  std::size_t cells = 0;
};

/// A labeled grid: every cell carries a component id (a 4-connected blob of
/// cells sharing a (cycle, phase) label) or kUnresolved, plus a JULIA_NEAR
/// mask for cells with a differently labeled 4-neighbor.
class FatouAtlas {
 public:
  static constexpr std::uint32_t kUnresolved = 0x7FFFFFFFu;
  static constexpr std::uint32_t kJuliaNearBit = 0x80000000u;

  FatouAtlas(GridWindow window, std::vector<std::uint32_t> labels, std::vector<ComponentInfo> components,
             std::vector<Cycle> cycles, OrbitOptions orbit_options, std::uint64_t map_fingerprint)
      : window_(window),
        labels_(std::move(labels)),
        components_(std::move(components)),
        cycles_(std::move(cycles)),
        orbit_options_(orbit_options),
        fingerprint_(map_fingerprint) {
    const int n = window_.resolution;
    if (labels_.size() != window_.cell_count()) throw PreconditionViolation("atlas: label count mismatch");
    julia_near_.assign(labels_.size(), 0);
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const auto idx = index(ix, iy);
        const std::uint32_t l = labels_[idx];
        if (l != kUnresolved && l >= components_.size()) {
          throw PreconditionViolation("atlas: label references unknown component " + std::to_string(l));
        }
        if (l == kUnresolved) ++unresolved_;
        auto check = [&](int jx, int jy) {
          if (jx < 0 || jy < 0 || jx >= n || jy >= n) return;
          const std::uint32_t m = labels_[index(jx, jy)];
          if (m == l) return;
          julia_near_[idx] = 1;
          if (l != kUnresolved && m != kUnresolved && m < components_.size()) {
            const auto& a = components_[l];
            const auto& b = components_[m];
            if (a.cycle_id == b.cycle_id && a.phase == b.phase) {
              throw PreconditionViolation("atlas: adjacent cells with equal (cycle, phase) in different blobs");
            }
          }
        };
        check(ix - 1, iy);
        check(ix + 1, iy);
        check(ix, iy - 1);
        check(ix, iy + 1);
      }
    }
  }

  const GridWindow& window() const noexcept { return window_; }
  double cell_size() const noexcept { return window_.cell_size(); }
  int resolution() const noexcept { return window_.resolution; }
  std::span<const std::uint32_t> labels() const noexcept { return labels_; }
  std::span<const ComponentInfo> components() const noexcept { return components_; }
  std::span<const Cycle> cycles() const noexcept { return cycles_; }
  const OrbitOptions& orbit_options() const noexcept { return orbit_options_; }
  std::uint64_t map_fingerprint() const noexcept { return fingerprint_; }
  std::size_t component_count() const noexcept { return components_.size(); }

  const ComponentInfo& component(std::uint32_t id) const {
    if (id >= components_.size()) throw UnknownComponent("unknown component id " + std::to_string(id));
    return components_[id];
  }

  std::size_t index(int ix, int iy) const noexcept {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(window_.resolution) + static_cast<std::size_t>(ix);
  }

  std::uint32_t label(int ix, int iy) const noexcept { return labels_[index(ix, iy)]; }
  std::uint32_t label(std::size_t idx) const noexcept { return labels_[idx]; }
  bool julia_near(std::size_t idx) const noexcept { return julia_near_[idx] != 0; }
  bool julia_near(int ix, int iy) const noexcept { return julia_near_[index(ix, iy)] != 0; }

  std::optional<std::uint32_t> label_at(cplx z) const noexcept {
    const auto idx = window_.cell_index(z);
    if (!idx) return std::nullopt;
    return labels_[*idx];
  }

  bool cycle_contains_infinity(int cycle_id) const noexcept {
    return cycle_id >= 0 && static_cast<std::size_t>(cycle_id) < cycles_.size() &&
           cycles_[static_cast<std::size_t>(cycle_id)].contains_infinity();
  }

  /// Some cell escapes or converges to a cycle through infinity.
  bool has_unbounded_component() const noexcept {
    return std::any_of(components_.begin(), components_.end(),
                       [this](const ComponentInfo& c) { return cycle_contains_infinity(c.cycle_id); });
  }

  double unresolved_fraction() const noexcept {
    return static_cast<double>(unresolved_) / static_cast<double>(labels_.size());
  }

  /// Copy with every cell of `id` turned UNRESOLVED (component table kept).
  FatouAtlas without_component(std::uint32_t id) const {
    component(id);
    auto labels = labels_;
    for (auto& l : labels) {
      if (l == id) l = kUnresolved;
    }
    auto comps = components_;
    comps[id].cells = 0;
    return FatouAtlas(window_, std::move(labels), std::move(comps), cycles_, orbit_options_, fingerprint_);
  }

  /// Calls fn(id) once for every component with a cell center strictly closer
  /// than eps to z. Cells outside the grid are not visited.
  template <typename Fn>
  void for_each_component_within(cplx z, double eps, Fn&& fn) const {
    const double cs = cell_size();
    const int n = window_.resolution;
    const double x0 = window_.center.real() - window_.half_width;
    const double y0 = window_.center.imag() + window_.half_width;
    const int ix_lo = std::max(0, static_cast<int>(std::floor((z.real() - eps - x0) / cs)));
    const int ix_hi = std::min(n - 1, static_cast<int>(std::floor((z.real() + eps - x0) / cs)));
    const int iy_lo = std::max(0, static_cast<int>(std::floor((y0 - (z.imag() + eps)) / cs)));
    const int iy_hi = std::min(n - 1, static_cast<int>(std::floor((y0 - (z.imag() - eps)) / cs)));
    const double eps2 = eps * eps;
    std::uint32_t seen[16];
    int nseen = 0;
    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
      for (int ix = ix_lo; ix <= ix_hi; ++ix) {
        const std::uint32_t l = labels_[index(ix, iy)];
        if (l == kUnresolved) continue;
        if (std::norm(window_.cell_center(ix, iy) - z) >= eps2) continue;
        bool dup = false;
        for (int s = 0; s < nseen; ++s) dup = dup || seen[s] == l;
        if (dup) continue;
        if (nseen < 16) seen[nseen++] = l;
        fn(l);
      }
    }
    if (nseen == 16) {
      // Rare: more than 16 distinct components in one disk. Repeat exactly.
      std::vector<std::uint32_t> all;
      for (int iy = iy_lo; iy <= iy_hi; ++iy) {
        for (int ix = ix_lo; ix <= ix_hi; ++ix) {
          const std::uint32_t l = labels_[index(ix, iy)];
          if (l == kUnresolved || std::norm(window_.cell_center(ix, iy) - z) >= eps2) continue;
          if (std::find(all.begin(), all.end(), l) == all.end()) all.push_back(l);
        }
      }
      for (auto l : all) {
        if (std::find(seen, seen + 16, l) == seen + 16) fn(l);
      }
    }
  }

 private:
  GridWindow window_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::uint8_t> julia_near_;
  std::vector<ComponentInfo> components_;
  std::vector<Cycle> cycles_;
  OrbitOptions orbit_options_;
  std::uint64_t fingerprint_;
  std::size_t unresolved_ = 0;
};

/// Throws WindowTooSmall unless every finite critical point and every finite
/// non-repelling cycle point sits at least one cell inside the window.
inline void check_window(const RationalMap& map, const GridWindow& window, std::span<const Cycle> cycles) {
  if (window.resolution < 64) throw WindowTooSmall("resolution must be >= 64");
  const double need = window.cell_size();
  auto check = [&](const SpherePoint& p, const std::string& what) {
    if (p.is_infinity()) return;
    if (window.margin(p.value()) < need) {
      throw WindowTooSmall(what + " (" + std::to_string(p.value().real()) + ", " + std::to_string(p.value().imag()) +
                           ") lies outside the window");
    }
  };
  for (const auto& r : critical_points(map).roots) check(r.point, "critical point");
  for (const auto& c : cycles) {
    if (c.cls.is_repelling()) continue;
    for (const auto& p : c.points) check(p, "cycle point");
  }
}

/// Classifies every cell center, then splits equal-(cycle, phase) regions into
/// 4-connected blobs. A blob is bounded when it touches no window edge and its
/// cycle avoids infinity.
inline FatouAtlas build_atlas(const RationalMap& map, const GridWindow& window, std::span<const Cycle> cycles,
                              const OrbitOptions& opt = {}) {
  check_window(map, window, cycles);
  const OrbitClassifier classifier(map, cycles, opt);
  const int n = window.resolution;
  std::vector<OrbitLabel> raw(window.cell_count());
  std::vector<std::uint8_t> resolved(window.cell_count(), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    for (int ix = 0; ix < n; ++ix) {
      const std::size_t idx = row * static_cast<std::size_t>(n) + static_cast<std::size_t>(ix);
      if (auto l = classifier.label(SpherePoint(window.cell_center(ix, static_cast<int>(row))))) {
        raw[idx] = *l;
        resolved[idx] = 1;
      }
    }
  });

  std::vector<std::uint32_t> labels(window.cell_count(), FatouAtlas::kUnresolved);
  std::vector<ComponentInfo> comps;
  std::map<std::pair<int, int>, int> blobs_per_key;
  std::vector<std::size_t> queue;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (!resolved[start] || labels[start] != FatouAtlas::kUnresolved) continue;
    const auto id = static_cast<std::uint32_t>(comps.size());
    const OrbitLabel key = raw[start];
    ComponentInfo info;
    info.cycle_id = key.cycle_id;
    info.phase = key.phase;
    info.blob = blobs_per_key[{key.cycle_id, key.phase}]++;
    bool touches_edge = false;
    queue.clear();
    queue.push_back(start);
    labels[start] = id;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t idx = queue[head];
      const int ix = static_cast<int>(idx % static_cast<std::size_t>(n));
      const int iy = static_cast<int>(idx / static_cast<std::size_t>(n));
      if (ix == 0 || iy == 0 || ix == n - 1 || iy == n - 1) touches_edge = true;
      auto visit = [&](int jx, int jy) {
        if (jx < 0 || jy < 0 || jx >= n || jy >= n) return;
        const std::size_t j = static_cast<std::size_t>(jy) * static_cast<std::size_t>(n) + static_cast<std::size_t>(jx);
        if (!resolved[j] || labels[j] != FatouAtlas::kUnresolved || !(raw[j] == key)) return;
        labels[j] = id;
        queue.push_back(j);
      };
      visit(ix - 1, iy);
      visit(ix + 1, iy);
      visit(ix, iy - 1);
      visit(ix, iy + 1);
    }
    info.cells = queue.size();
    const bool through_infinity = cycles[static_cast<std::size_t>(key.cycle_id)].contains_infinity();
    info.bounded = !touches_edge && !through_infinity;
    comps.push_back(info);
  }
  return FatouAtlas(window, std::move(labels), std::move(comps), std::vector<Cycle>(cycles.begin(), cycles.end()),
                    opt, map.fingerprint());
}

/// Euclidean distance from z to the nearest cell center of component `id`,
/// floored at the cell size.
inline double component_distance(const FatouAtlas& atlas, cplx z, std::uint32_t id) {
  if (!atlas.window().contains(z)) throw OutOfWindow("component_distance: point outside the atlas window");
  atlas.component(id);
  const auto [cx, cy] = *atlas.window().cell_of(z);
  const int n = atlas.resolution();
  const double cs = atlas.cell_size();
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < n; ++r) {
    if ((r - 1) * cs > best) break;
    for (int iy = cy - r; iy <= cy + r; ++iy) {
      if (iy < 0 || iy >= n) continue;
      const bool edge_row = (iy == cy - r || iy == cy + r);
      for (int ix = cx - r; ix <= cx + r; ix += edge_row ? 1 : 2 * r) {
        if (ix >= 0 && ix < n && atlas.label(ix, iy) == id) {
          best = std::min(best, std::abs(atlas.window().cell_center(ix, iy) - z));
        }
        if (r == 0) break;
      }
    }
  }
  return std::max(best, cs);
}

enum class Connectivity { connected, disconnected, unknown };

inline std::string to_string(Connectivity c) {
  switch (c) {
    case Connectivity::connected: return "CONNECTED";
    case Connectivity::disconnected: return "DISCONNECTED";
    case Connectivity::unknown: return "UNKNOWN";
  }
  return "?";
}

struct CriticalOrbitFate {
  SpherePoint point;
  int multiplicity = 1;
  bool escaped = false;
  int escape_iteration = -1;
};

struct ConnectivityResult {
  Connectivity verdict = Connectivity::unknown;
  std::vector<CriticalOrbitFate> critical;  // finite critical points only

  int escaping_count() const {
    return static_cast<int>(std::count_if(critical.begin(), critical.end(),
                                          [](const CriticalOrbitFate& f) { return f.escaped; }));
  }
};

/// Connectedness of the Julia set of a polynomial from its finite critical
/// orbits: all bounded means connected, any escape means disconnected. An
/// orbit that neither escapes nor stays well inside the escape radius leaves
/// the verdict UNKNOWN.
inline ConnectivityResult connectivity_of_J_polynomial(const RationalMap& map, int max_iter = 2000,
                                                       double escape_radius = 1e6) {
  if (!map.is_polynomial()) throw NotAPolynomial("connectivity_of_J_polynomial: map is not a polynomial");
  ConnectivityResult out;
  bool near_threshold = false;
  for (const auto& r : critical_points(map).roots) {
    if (r.point.is_infinity()) continue;
    CriticalOrbitFate fate{r.point, r.multiplicity, false, -1};
    SpherePoint z = r.point;
    double peak = 0.0;
    for (int i = 0; i <= max_iter; ++i) {
      if (z.is_infinity() || std::abs(z.value()) > escape_radius) {
        fate.escaped = true;
        fate.escape_iteration = i;
        break;
      }
      peak = std::max(peak, std::abs(z.value()));
      z = map(z);
    }
    if (!fate.escaped && peak > 0.1 * escape_radius) near_threshold = true;
    out.critical.push_back(fate);
  }
  if (near_threshold) {
    out.verdict = Connectivity::unknown;
  } else if (out.escaping_count() == 0) {
    out.verdict = Connectivity::connected;
  } else {
    out.verdict = Connectivity::disconnected;
  }
  return out;
}

/// Components consistent with the point z: the component of its own cell when
/// the orbit label matches, otherwise matching components among the 3x3
/// neighborhood; outside the window, every unbounded component with the
/// matching label.
inline std::vector<std::uint32_t> locate_components(const FatouAtlas& atlas, const OrbitClassifier& classifier,
                                                    const SpherePoint& z) {
  std::vector<std::uint32_t> out;
  const auto lab = classifier.label(z);
  if (!lab) return out;
  auto matches = [&](std::uint32_t id) {
    if (id == FatouAtlas::kUnresolved) return false;
    const auto& c = atlas.component(id);
    return c.cycle_id == lab->cycle_id && c.phase == lab->phase;
  };
  if (z.is_finite()) {
    if (const auto cell = atlas.window().cell_of(z.value())) {
      const auto [cx, cy] = *cell;
      const auto own = atlas.label(cx, cy);
      if (matches(own)) return {own};
      const int n = atlas.resolution();
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ix = cx + dx, iy = cy + dy;
          if (ix < 0 || iy < 0 || ix >= n || iy >= n) continue;
          const auto l = atlas.label(ix, iy);
          if (matches(l) && std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
        }
      }
      return out;
    }
  }
  for (std::uint32_t id = 0; id < atlas.component_count(); ++id) {
    if (matches(id) && !atlas.component(id).bounded) out.push_back(id);
  }
  return out;
}

struct InvarianceProbeResult {
  bool pass = false;
  int probes = 0;
  int forward_failures = 0;
  int backward_failures = 0;
};

/// Probes random interior cells of a component: the forward image and all d
/// preimages of each probe must locate in that same component.
inline InvarianceProbeResult complete_invariance_check(const RationalMap& map, const FatouAtlas& atlas,
                                                       std::uint32_t id, int n_probes,
                                                       std::uint64_t rng_seed = 0x1234) {
  atlas.component(id);
  const int n = atlas.resolution();
  std::vector<std::size_t> eligible;
  for (int iy = 1; iy < n - 1; ++iy) {
    for (int ix = 1; ix < n - 1; ++ix) {
      if (atlas.label(ix, iy) != id || atlas.julia_near(ix, iy)) continue;
      if (atlas.julia_near(ix - 1, iy) || atlas.julia_near(ix + 1, iy) || atlas.julia_near(ix, iy - 1) ||
          atlas.julia_near(ix, iy + 1)) {
        continue;
      }
      eligible.push_back(atlas.index(ix, iy));
    }
  }
  if (eligible.empty()) throw PreconditionViolation("complete_invariance_check: component has no interior cells");
  const OrbitClassifier classifier(map, atlas.cycles(), atlas.orbit_options());
  const CounterRng rng(rng_seed);
  InvarianceProbeResult res;
  res.probes = n_probes;
  auto inside = [&](const SpherePoint& p) {
    const auto c = locate_components(atlas, classifier, p);
    return std::find(c.begin(), c.end(), id) != c.end();
  };
  for (int i = 0; i < n_probes; ++i) {
    const auto pick = static_cast<std::size_t>(rng.uniform(static_cast<std::uint64_t>(i)) *
                                               static_cast<double>(eligible.size()));
    const SpherePoint z(atlas.window().cell_center(eligible[std::min(pick, eligible.size() - 1)]));
    if (!inside(map(z))) ++res.forward_failures;
    for (const auto& r : preimages(map, z).roots) {
      if (!inside(r.point)) {
        ++res.backward_failures;
        break;
      }
    }
  }
  res.pass = res.forward_failures == 0 && res.backward_failures == 0;
  return res;
}

struct AtlasDump {
  GridWindow window;
  std::vector<std::uint32_t> labels;  // high bit = JULIA_NEAR, 0x7FFFFFFF = UNRESOLVED
};

inline constexpr char kAtlasMagic[8] = {'M', 'M', 'E', 'A', 'T', 'L', 'A', 'S'};

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  is.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!is) throw PreconditionViolation("atlas dump: truncated input");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

/// Binary dump, little endian: magic "MMEATLAS", u32 version (1), f64 center
/// re, f64 center im, f64 half width, u32 resolution, then resolution^2 u32
/// labels row-major from the top row.
inline void write_atlas_dump(std::ostream& os, const FatouAtlas& atlas) {
  os.write(kAtlasMagic, sizeof kAtlasMagic);
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<double>(os, atlas.window().center.real());
  detail::write_le<double>(os, atlas.window().center.imag());
  detail::write_le<double>(os, atlas.window().half_width);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(atlas.resolution()));
  for (std::size_t i = 0; i < atlas.labels().size(); ++i) {
    std::uint32_t v = atlas.label(i);
    if (atlas.julia_near(i)) v |= FatouAtlas::kJuliaNearBit;
    detail::write_le<std::uint32_t>(os, v);
  }
}

inline AtlasDump read_atlas_dump(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + 8, kAtlasMagic)) throw PreconditionViolation("atlas dump: bad magic");
  if (detail::read_le<std::uint32_t>(is) != 1) throw PreconditionViolation("atlas dump: unsupported version");
  AtlasDump d;
  const double re = detail::read_le<double>(is);
  const double im = detail::read_le<double>(is);
  d.window.center = {re, im};
  d.window.half_width = detail::read_le<double>(is);
  d.window.resolution = static_cast<int>(detail::read_le<std::uint32_t>(is));
  d.labels.resize(d.window.cell_count());
  for (auto& l : d.labels) l = detail::read_le<std::uint32_t>(is);
  return d;
}

}  // namespace mmelab
