#pragma once

#include <cmath>
#include <complex>
#include <limits>

#include "mmelab/errors.hpp"

namespace mmelab {

using cplx = std::complex<double>;

// A point of the Riemann sphere: a finite complex number or infinity.
class SpherePoint {
 public:
  constexpr SpherePoint() = default;

  SpherePoint(cplx z) : z_(z) {  // NOLINT(google-explicit-constructor)
    if (std::isnan(z.real()) || std::isnan(z.imag())) {
      throw PreconditionViolation("SpherePoint: NaN component");
    }
    if (std::isinf(z.real()) || std::isinf(z.imag())) {
      inf_ = true;
      z_ = {};
    }
  }

  SpherePoint(double re, double im = 0.0) : SpherePoint(cplx{re, im}) {}

  static constexpr SpherePoint infinity() {
    SpherePoint p;
    p.inf_ = true;
    return p;
  }

  constexpr bool is_infinity() const noexcept { return inf_; }
  constexpr bool is_finite() const noexcept { return !inf_; }

  // Only meaningful for finite points.
  constexpr cplx value() const noexcept { return z_; }

  friend constexpr bool operator==(const SpherePoint& a, const SpherePoint& b) {
    return a.inf_ == b.inf_ && (a.inf_ || a.z_ == b.z_);
  }

 private:
  cplx z_{};
  bool inf_ = false;
};

/// Chordal distance on the unit sphere (Euclidean distance in R^3 between the
/// stereographic images), bounded by 2. Works across the point at infinity.
inline double chordal_distance(const SpherePoint& a, const SpherePoint& b) {
  if (a.is_infinity() && b.is_infinity()) return 0.0;
  if (a.is_infinity()) return 2.0 / std::hypot(1.0, std::abs(b.value()));
  if (b.is_infinity()) return 2.0 / std::hypot(1.0, std::abs(a.value()));
  cplx z = a.value();
  cplx w = b.value();
  const double nz = std::norm(z);
  const double nw = std::norm(w);
  if (nz > 1.0 && nw > 1.0) {
    // d(z, w) = d(1/z, 1/w); keeps the products below from overflowing.
    z = 1.0 / z;
    w = 1.0 / w;
    return 2.0 * std::sqrt(std::norm(z - w) / ((1.0 + std::norm(z)) * (1.0 + std::norm(w))));
  }
  if (nz < 1e200 && nw < 1e200) {
    return 2.0 * std::sqrt(std::norm(z - w) / ((1.0 + nz) * (1.0 + nw)));
  }
  return 2.0 * std::abs(z - w) / (std::hypot(1.0, std::abs(z)) * std::hypot(1.0, std::abs(w)));
}

struct SphereCoords {
  double x;
  double y;
  double z;
};

// Stereographic embedding; infinity goes to the north pole.
inline SphereCoords stereographic(const SpherePoint& p) {
  if (p.is_infinity()) return {0.0, 0.0, 1.0};
  const cplx z = p.value();
  const double m = std::abs(z);
  if (m > 1e150) return {0.0, 0.0, 1.0};
  const double n2 = m * m;
  return {2.0 * z.real() / (1.0 + n2), 2.0 * z.imag() / (1.0 + n2), (n2 - 1.0) / (n2 + 1.0)};
}

}  // namespace mmelab
