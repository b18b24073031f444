#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mmelab/cycles.hpp"
#include "mmelab/errors.hpp"
#include "mmelab/rational_map.hpp"
#include "mmelab/rng.hpp"
#include "mmelab/sphere.hpp"

namespace mmelab {

/// Points distributed (approximately) by the measure of maximal entropy,
/// together with everything needed to regenerate them bit for bit.
struct MMESampleSet {
  std::vector<SpherePoint> points;
  SpherePoint seed_point;
  int burn_in = 0;
  std::size_t n = 0;
  std::uint64_t rng_seed = 0;
  std::uint64_t map_fingerprint = 0;
};

inline constexpr int kDefaultBurnIn = 100;
inline constexpr int kTrapWindow = 50;

namespace detail {

// True when the last kTrapWindow points take at most two distinct values.
inline bool orbit_trapped(const std::array<SpherePoint, kTrapWindow>& ring) {
  SpherePoint a = ring[0];
  SpherePoint b = ring[0];
  bool have_b = false;
  for (const auto& p : ring) {
    if (chordal_distance(p, a) < 1e-9) continue;
    if (!have_b) {
      b = p;
      have_b = true;
      continue;
    }
    if (chordal_distance(p, b) < 1e-9) continue;
    return false;
  }
  return true;
}

}  // namespace detail

/// Backward random iteration along a single path: at every step the next
/// point is one of the d preimages of the current one, a root of
/// multiplicity m being taken with probability m/d. The choice at step s uses
/// the counter-based stream (rng_seed, s).
inline MMESampleSet sample_backward(const RationalMap& map, const SpherePoint& seed, int burn_in, std::size_t n,
                                    std::uint64_t rng_seed) {
  if (burn_in < 1) throw PreconditionViolation("sample_backward: burn_in must be >= 1");
  if (n < 1) throw PreconditionViolation("sample_backward: n must be >= 1");
  const CounterRng rng(rng_seed);
  const double d = map.degree();

  MMESampleSet out;
  out.seed_point = seed;
  out.burn_in = burn_in;
  out.n = n;
  out.rng_seed = rng_seed;
  out.map_fingerprint = map.fingerprint();
  out.points.reserve(n);

  std::array<SpherePoint, kTrapWindow> ring{};
  SpherePoint z = seed;
  const std::uint64_t total = static_cast<std::uint64_t>(burn_in) + n;
  for (std::uint64_t step = 0; step < total; ++step) {
    const RootSet pre = preimages(map, z);
    const double u = rng.uniform(step) * d;
    double acc = 0.0;
    z = pre.roots.back().point;
    for (const auto& r : pre.roots) {
      acc += r.multiplicity;
      if (u < acc) {
        z = r.point;
        break;
      }
    }
    ring[step % kTrapWindow] = z;
    if (step + 1 >= kTrapWindow && detail::orbit_trapped(ring)) {
      throw ExceptionalSeed("backward orbit trapped in at most two points for " + std::to_string(kTrapWindow) +
                            " steps");
    }
    if (step >= static_cast<std::uint64_t>(burn_in)) out.points.push_back(z);
  }
  return out;
}

/// A seed on the Julia set: a finite repelling periodic point (lowest period
/// first), else a finite preimage of a repelling point at infinity, else a
/// fixed generic point that the trap detector screens.
inline SpherePoint default_seed(const RationalMap& map, std::span<const Cycle> cycles) {
  for (const auto& c : cycles) {
    if (!c.cls.is_repelling()) continue;
    for (const auto& p : c.points) {
      if (p.is_finite()) return p;
    }
  }
  for (const auto& c : cycles) {
    if (!c.cls.is_repelling()) continue;
    for (const auto& r : preimages(map, SpherePoint::infinity()).roots) {
      if (r.point.is_finite()) return r.point;
    }
  }
  return SpherePoint(cplx{0.3141592653589793, 0.2718281828459045});
}

struct TestFunction {
  std::string name;
  std::function<double(const SpherePoint&)> f;
};

inline std::vector<TestFunction> default_test_functions() {
  const SpherePoint ref(cplx{0.5, 0.5});
  return {
      {"chordal_x", [](const SpherePoint& p) { return stereographic(p).x; }},
      {"chordal_y", [](const SpherePoint& p) { return stereographic(p).y; }},
      {"chordal_distance_to_0.5+0.5i", [ref](const SpherePoint& p) { return chordal_distance(p, ref); }},
  };
}

struct InvarianceStatistic {
  std::string name;
  double delta = 0.0;      // |mean f(R z_i) - mean f(z_i)|
  double threshold = 0.0;  // 4 stddev(f(z_i)) / sqrt(n)
  bool pass() const noexcept { return delta <= threshold; }
};

/// Empirical check that pushing the samples forward leaves test-function
/// means unchanged, at a 4-sigma sampling threshold.
inline std::vector<InvarianceStatistic> invariance_check(const MMESampleSet& samples, const RationalMap& map,
                                                         std::span<const TestFunction> fs) {
  if (samples.points.size() < 10000) throw PreconditionViolation("invariance_check: needs n >= 1e4");
  std::vector<SpherePoint> images;
  images.reserve(samples.points.size());
  for (const auto& p : samples.points) images.push_back(map(p));
  const double n = static_cast<double>(samples.points.size());

  std::vector<InvarianceStatistic> out;
  for (const auto& tf : fs) {
    double sum = 0.0, sum_image = 0.0;
    for (std::size_t i = 0; i < samples.points.size(); ++i) {
      sum += tf.f(samples.points[i]);
      sum_image += tf.f(images[i]);
    }
    const double mean = sum / n;
    double var = 0.0;
    for (const auto& p : samples.points) {
      const double dv = tf.f(p) - mean;
      var += dv * dv;
    }
    var /= (n - 1.0);
    out.push_back({tf.name, std::abs(sum_image / n - mean), 4.0 * std::sqrt(var) / std::sqrt(n)});
  }
  return out;
}

inline std::vector<InvarianceStatistic> invariance_check(const MMESampleSet& samples, const RationalMap& map) {
  const auto fs = default_test_functions();
  return invariance_check(samples, map, fs);
}

/// Fraction of probes that have a sample within `radius` (chordal).
inline double support_coverage(const MMESampleSet& samples, std::span<const SpherePoint> probes, double radius) {
  if (probes.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& probe : probes) {
    for (const auto& p : samples.points) {
      if (chordal_distance(p, probe) < radius) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(probes.size());
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

/// CSV with header `re,im`. Infinity has no row representation and is an error.
inline void write_samples_csv(std::ostream& os, const MMESampleSet& samples) {
  os << "re,im\n";
  for (const auto& p : samples.points) {
    if (p.is_infinity()) throw PreconditionViolation("sample set contains the point at infinity");
    os << format_double(p.value().real()) << ',' << format_double(p.value().imag()) << '\n';
  }
}

}  // namespace mmelab
