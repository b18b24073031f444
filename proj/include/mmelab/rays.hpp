#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmelab/atlas.hpp"
#include "mmelab/errors.hpp"
#include "mmelab/rational_map.hpp"
#include "mmelab/sampler.hpp"
#include "mmelab/sphere.hpp"

namespace mmelab {

/// An angle in turns, kept as an exact fraction p/q in [0, 1) so that angle
/// multiplication by d never accumulates rounding.
class Angle {
 public:
  Angle() = default;

  Angle(std::uint64_t p, std::uint64_t q) {
    if (q == 0) throw PreconditionViolation("Angle: zero denominator");
    p %= q;
    const std::uint64_t g = std::gcd(p, q);
    p_ = p / g;
    q_ = q / g;
  }

  /// Best rational approximation with denominator at most max_den.
  static Angle from_double(double turns, std::uint64_t max_den = 1000000000ULL) {
    if (!std::isfinite(turns)) throw PreconditionViolation("Angle: non-finite value");
    double x = turns - std::floor(turns);
    // Continued fraction convergents.
    std::uint64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double rest = x;
    for (int it = 0; it < 64; ++it) {
      const double a = std::floor(rest);
      const auto ai = static_cast<std::uint64_t>(a);
      const std::uint64_t p2 = ai * p1 + p0;
      const std::uint64_t q2 = ai * q1 + q0;
      if (q2 > max_den) break;
      p0 = p1;
      q0 = q1;
      p1 = p2;
      q1 = q2;
      const double frac = rest - a;
      if (frac < 1e-15 || std::abs(static_cast<double>(p1) / static_cast<double>(q1) - x) < 1e-17) break;
      rest = 1.0 / frac;
    }
    if (q1 == 0) return Angle(0, 1);
    return Angle(p1 % q1, q1);
  }

  /// "p/q" or a decimal such as "0.25" (taken exactly).
  static Angle parse(std::string_view s) {
    auto bad = [&] { return PreconditionViolation("Angle: cannot parse '" + std::string(s) + "'"); };
    if (const auto slash = s.find('/'); slash != std::string_view::npos) {
      std::uint64_t p = 0, q = 0;
      const auto a = s.substr(0, slash);
      const auto b = s.substr(slash + 1);
      if (std::from_chars(a.data(), a.data() + a.size(), p).ptr != a.data() + a.size()) throw bad();
      if (std::from_chars(b.data(), b.data() + b.size(), q).ptr != b.data() + b.size()) throw bad();
      if (q == 0) throw bad();
      return Angle(p, q);
    }
    const auto dot = s.find('.');
    const auto int_part = s.substr(0, dot);
    const auto frac_part = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    if (frac_part.size() > 18 || (int_part.empty() && frac_part.empty())) throw bad();
    for (char c : int_part) {
      if (c < '0' || c > '9') throw bad();
    }
    std::uint64_t num = 0, den = 1;
    for (char c : frac_part) {
      if (c < '0' || c > '9') throw bad();
      num = num * 10 + static_cast<std::uint64_t>(c - '0');
      den *= 10;
    }
    return Angle(num, den);
  }

  std::uint64_t num() const noexcept { return p_; }
  std::uint64_t den() const noexcept { return q_; }
  double turns() const noexcept { return static_cast<double>(p_) / static_cast<double>(q_); }

  Angle times(std::uint64_t d) const {
    const auto prod = static_cast<unsigned __int128>(p_) * d % q_;
    return Angle(static_cast<std::uint64_t>(prod), q_);
  }

  Angle negated() const { return Angle(p_ == 0 ? 0 : q_ - p_, q_); }

  std::string to_string() const { return std::to_string(p_) + "/" + std::to_string(q_); }

  friend bool operator==(const Angle&, const Angle&) = default;
  friend auto operator<=>(const Angle& a, const Angle& b) {
    return static_cast<unsigned __int128>(a.p_) * b.q_ <=> static_cast<unsigned __int128>(b.p_) * a.q_;
  }

 private:
  std::uint64_t p_ = 0;
  std::uint64_t q_ = 1;
};

struct RaySample {
  double potential = 0.0;  // G = log r
  double r = 0.0;          // exp(G); rounds to 1 long before G reaches 0
  cplx point{};
};

enum class RayStatus { landed, not_landed, lost };

inline std::string to_string(RayStatus s) {
  switch (s) {
    case RayStatus::landed: return "LANDED";
    case RayStatus::not_landed: return "NOT_LANDED";
    case RayStatus::lost: return "LOST";
  }
  return "?";
}

struct RayTrace {
  Angle theta;
  std::vector<RaySample> samples;  // potential strictly decreasing
  RayStatus status = RayStatus::not_landed;
  std::optional<cplx> landing_point;
  std::uint64_t map_fingerprint = 0;
};

struct TraceOptions {
  double r_start = 1e4;
  double r_end = 1.0;  // > 1 stops the schedule once r drops below it
  int steps = 400;     // potential divisions by d
  int substeps = 4;    // samples per division by d
  double continuity_bound = 0.5;  // chordal, per step
  std::size_t max_orbit = 4096;   // forward orbit of theta that is traced alongside
};

struct LandingOptions {
  double tol = 1e-6;
  double tail_fraction = 0.2;
};

namespace detail {

// Conjugates a polynomial by z -> c z with c^(d-1) = a_d, which makes it monic.
inline std::pair<RationalMap, cplx> monic_form(const RationalMap& map) {
  const auto& p = map.numerator();
  const cplx scale = map.denominator().coeff(0);
  const int d = p.degree();
  const cplx lead = p.leading() / scale;
  const cplx c = std::pow(lead, 1.0 / (d - 1));
  return {conjugate_affine(map, c, cplx{}), c};
}

}  // namespace detail

/// Verdict of landing(): LANDED when the tail of the trace sits inside a
/// chordal ball of radius tol around its mean.
inline std::optional<cplx> landing(const RayTrace& ray, const LandingOptions& opt = {}) {
  if (ray.status == RayStatus::lost) throw PreconditionViolation("landing: ray was lost");
  if (ray.samples.empty()) return std::nullopt;
  const auto n = ray.samples.size();
  const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(opt.tail_fraction * n)));
  cplx mean{};
  for (std::size_t i = n - tail; i < n; ++i) mean += ray.samples[i].point;
  mean /= static_cast<double>(tail);
  for (std::size_t i = n - tail; i < n; ++i) {
    if (chordal_distance(ray.samples[i].point, mean) >= opt.tol) return std::nullopt;
  }
  return mean;
}

/// External ray of angle theta (in turns) for a polynomial with connected
/// Julia set. The potential follows G_k = log(r_start) d^(-k/substeps). The
/// ray point at (theta, G) is the preimage of the point at (d theta, d G)
/// nearest to the previous point at angle theta, so all angles of the forward
/// orbit of theta are traced together.
inline RayTrace trace_ray(const RationalMap& map, const Angle& theta, const TraceOptions& opt = {},
                          const LandingOptions& land = {}) {
  if (!map.is_polynomial()) throw NotAPolynomial("trace_ray: map is not a polynomial");
  const auto conn = connectivity_of_J_polynomial(map);
  if (conn.verdict != Connectivity::connected) {
    throw JNotConnected("trace_ray: Julia set is " + to_string(conn.verdict));
  }
  if (opt.r_start <= 1.0 || opt.steps < 2 || opt.substeps < 1) {
    throw PreconditionViolation("trace_ray: need r_start > 1, steps >= 2 and substeps >= 1");
  }
  const auto [monic, c] = detail::monic_form(map);
  const int d = monic.degree();
  const cplx shift = monic.numerator().coeff(d - 1) / static_cast<double>(d);

  // Forward orbit of theta under multiplication by d.
  std::vector<Angle> orbit;
  std::map<Angle, std::size_t> index;
  for (Angle a = theta; !index.count(a); a = a.times(static_cast<std::uint64_t>(d))) {
    if (orbit.size() >= opt.max_orbit) throw PreconditionViolation("trace_ray: angle orbit too long");
    index[a] = orbit.size();
    orbit.push_back(a);
  }
  std::vector<std::size_t> image(orbit.size());
  for (std::size_t i = 0; i < orbit.size(); ++i) image[i] = index.at(orbit[i].times(static_cast<std::uint64_t>(d)));

  const double g0 = std::log(opt.r_start);
  const double g_end = opt.r_end > 1.0 ? std::log(opt.r_end) : 0.0;
  const int sub = opt.substeps;
  const std::size_t levels = static_cast<std::size_t>(opt.steps) * static_cast<std::size_t>(sub);
  auto potential = [&](std::size_t k) {
    return g0 * std::pow(static_cast<double>(d), -static_cast<double>(k) / sub);
  };
  // ring[k % (sub + 1)][i]: point of angle orbit[i] at level k.
  std::vector<std::vector<cplx>> ring(static_cast<std::size_t>(sub) + 1, std::vector<cplx>(orbit.size()));
  auto at = [&](std::size_t k) -> std::vector<cplx>& { return ring[k % ring.size()]; };

  RayTrace out;
  out.theta = theta;
  out.map_fingerprint = map.fingerprint();
  bool lost = false;
  for (std::size_t k = 0; k < levels && !lost; ++k) {
    const double g = potential(k);
    if (k > 0 && (g <= g_end || g < std::numeric_limits<double>::min())) break;
    auto& cur = at(k);
    if (k < static_cast<std::size_t>(sub)) {
      // Far out the Boettcher coordinate is z + a_{d-1}/d + O(1/z).
      for (std::size_t i = 0; i < orbit.size(); ++i) {
        cur[i] = std::polar(std::exp(g), 2.0 * std::numbers::pi * orbit[i].turns()) - shift;
      }
    } else {
      const auto& source = at(k - static_cast<std::size_t>(sub));
      const auto& prev = at(k - 1);
      std::vector<cplx> next(orbit.size());
      for (std::size_t i = 0; i < orbit.size(); ++i) {
        const auto pre = preimages(monic, SpherePoint(source[image[i]]));
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : pre.roots) {
          if (r.point.is_infinity()) continue;
          const double dist = std::abs(r.point.value() - prev[i]);
          if (dist < best) {
            best = dist;
            next[i] = r.point.value();
          }
        }
        if (chordal_distance(SpherePoint(next[i] / c), SpherePoint(prev[i] / c)) > opt.continuity_bound) lost = true;
      }
      if (lost) break;
      cur = std::move(next);
    }
    out.samples.push_back({g, std::exp(g), cur[0] / c});
  }
  if (lost) {
    out.status = RayStatus::lost;
    return out;
  }
  out.landing_point = landing(out, land);
  out.status = out.landing_point ? RayStatus::landed : RayStatus::not_landed;
  return out;
}

inline RayTrace trace_ray(const RationalMap& map, double theta_turns, const TraceOptions& opt = {},
                          const LandingOptions& land = {}) {
  return trace_ray(map, Angle::from_double(theta_turns), opt, land);
}

enum class ColandingVerdict { coland, distinct, undecided };

inline std::string to_string(ColandingVerdict v) {
  switch (v) {
    case ColandingVerdict::coland: return "COLAND";
    case ColandingVerdict::distinct: return "DISTINCT";
    case ColandingVerdict::undecided: return "UNDECIDED";
  }
  return "?";
}

struct ColandingResult {
  ColandingVerdict verdict = ColandingVerdict::undecided;
  std::optional<cplx> point;  // common landing point when COLAND
  RayTrace ray0;
  RayTrace ray1;
};

/// COLAND when both rays land within tol of each other, DISTINCT when both
/// land more than 10 tol apart, UNDECIDED otherwise.
inline ColandingResult colanding_pair(const RationalMap& map, const Angle& theta0, const Angle& theta1,
                                      double tol = 1e-6, const TraceOptions& opt = {}) {
  LandingOptions land;
  land.tol = tol;
  ColandingResult out{ColandingVerdict::undecided, std::nullopt, trace_ray(map, theta0, opt, land),
                      trace_ray(map, theta1, opt, land)};
  if (out.ray0.status != RayStatus::landed || out.ray1.status != RayStatus::landed) return out;
  const double dist = chordal_distance(*out.ray0.landing_point, *out.ray1.landing_point);
  if (dist < tol) {
    out.verdict = ColandingVerdict::coland;
    out.point = 0.5 * (*out.ray0.landing_point + *out.ray1.landing_point);
  } else if (dist > 10.0 * tol) {
    out.verdict = ColandingVerdict::distinct;
  }
  return out;
}

struct CutPointCheck {
  cplx probe_a{};
  cplx probe_b{};
  std::optional<std::uint32_t> component_a;
  std::optional<std::uint32_t> component_b;
  bool separated = false;  // both probes in labeled, different components
};

/// Two co-landing rays split a small disk around their landing point z0 into
/// two sectors. One probe is placed at distance delta from z0 along the
/// bisector of each sector; a cut point puts them in different atlas blobs.
inline CutPointCheck cut_point_check(const FatouAtlas& atlas, const RayTrace& ray0, const RayTrace& ray1, cplx z0,
                                     double delta = 0.05) {
  auto direction = [&](const RayTrace& ray) {
    for (auto it = ray.samples.rbegin(); it != ray.samples.rend(); ++it) {
      const cplx v = it->point - z0;
      if (std::abs(v) >= delta) return v / std::abs(v);
    }
    throw PreconditionViolation("cut_point_check: ray never leaves the probe radius");
  };
  const cplx u0 = direction(ray0);
  const cplx u1 = direction(ray1);
  // Bisector of the sector swept counterclockwise from u0 to u1; the other
  // sector's bisector is its opposite.
  const double sweep = std::arg(u1 / u0);
  const double span = sweep > 0 ? sweep : sweep + 2.0 * std::numbers::pi;
  const cplx bis = u0 * std::polar(1.0, span / 2.0);
  CutPointCheck out;
  out.probe_a = z0 + delta * bis;
  out.probe_b = z0 - delta * bis;
  auto locate = [&](cplx p) -> std::optional<std::uint32_t> {
    const auto l = atlas.label_at(p);
    if (!l || *l == FatouAtlas::kUnresolved) return std::nullopt;
    return *l;
  };
  out.component_a = locate(out.probe_a);
  out.component_b = locate(out.probe_b);
  out.separated = out.component_a && out.component_b && *out.component_a != *out.component_b;
  return out;
}

/// CSV with header `r,re,im`, one row per sample.
inline void write_ray_csv(std::ostream& os, const RayTrace& ray) {
  os << "r,re,im\n";
  for (const auto& s : ray.samples) {
    os << format_double(s.r) << ',' << format_double(s.point.real()) << ',' << format_double(s.point.imag()) << '\n';
  }
}

}  // namespace mmelab
