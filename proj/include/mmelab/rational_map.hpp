#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmelab/errors.hpp"
#include "mmelab/polynomial.hpp"
#include "mmelab/sphere.hpp"

namespace mmelab {

// Which affine chart a sphere point is read in: z itself, or w = 1/z.
enum class Chart { direct, inverted };

inline Chart chart_of(const SpherePoint& p) {
  return (p.is_infinity() || std::abs(p.value()) > 1.0) ? Chart::inverted : Chart::direct;
}

inline cplx to_chart(const SpherePoint& p, Chart c) {
  if (c == Chart::direct) return p.value();
  return p.is_infinity() ? cplx{} : 1.0 / p.value();
}

inline SpherePoint from_chart(cplx x, Chart c) {
  if (c == Chart::direct) return SpherePoint(x);
  if (x == cplx{}) return SpherePoint::infinity();
  return SpherePoint(1.0 / x);
}

/// A ratio of polynomials that is only ever evaluated (derivatives).
struct RationalFunction {
  Polynomial num;
  Polynomial den;
};

/// R = P / Q of degree d = max(deg P, deg Q) >= 2, with P and Q coprime.
class RationalMap {
 public:
  RationalMap(Polynomial num, Polynomial den) : num_(std::move(num)), den_(std::move(den)) {
    if (den_.is_zero()) throw InvalidMap("denominator is the zero polynomial");
    if (num_.is_zero()) throw InvalidMap("numerator is the zero polynomial (constant map)");
    degree_ = std::max(num_.degree(), den_.degree());
    if (degree_ < 2) throw InvalidMap("degree " + std::to_string(degree_) + " < 2");
    check_coprime();
    padded_num_ = padded(num_);
    padded_den_ = padded(den_);
    zero_cut_ = kCoefficientZero * std::max(num_.max_modulus(), den_.max_modulus());
  }

  static RationalMap polynomial(Polynomial p) { return RationalMap(std::move(p), Polynomial({cplx{1.0}})); }

  const Polynomial& numerator() const noexcept { return num_; }
  const Polynomial& denominator() const noexcept { return den_; }
  int degree() const noexcept { return degree_; }
  bool is_polynomial() const noexcept { return den_.degree() == 0; }

  /// FNV-1a over the coefficient bit patterns.
  std::uint64_t fingerprint() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& c : num_.coeffs()) {
      mix(std::bit_cast<std::uint64_t>(c.real()));
      mix(std::bit_cast<std::uint64_t>(c.imag()));
    }
    mix(0xffffffffffffffffULL);
    for (const auto& c : den_.coeffs()) {
      mix(std::bit_cast<std::uint64_t>(c.real()));
      mix(std::bit_cast<std::uint64_t>(c.imag()));
    }
    return h;
  }

  /// R(z). Points with |z| > 1 (and infinity) are evaluated in the w = 1/z
  /// chart through the reversed, degree-padded coefficient lists.
  SpherePoint operator()(const SpherePoint& z) const {
    cplx a, b;
    if (z.is_finite() && std::norm(z.value()) <= 1.0) {
      const cplx x = z.value();
      a = horner(padded_num_, x);
      b = horner(padded_den_, x);
    } else {
      const cplx w = z.is_infinity() ? cplx{} : 1.0 / z.value();
      a = horner_reversed(padded_num_, w);
      b = horner_reversed(padded_den_, w);
    }
    if (std::abs(a) <= zero_cut_ && std::abs(b) <= zero_cut_) {
      throw CoprimalityViolation("numerator and denominator both vanish");
    }
    if (b == cplx{}) return SpherePoint::infinity();
    const cplx q = a / b;
    if (!std::isfinite(q.real()) || !std::isfinite(q.imag())) return SpherePoint::infinity();
    return SpherePoint(q);
  }

  /// Derivative of x -> chart_out(R(chart_in^{-1}(x))) at the chart
  /// coordinate x. The multiplier of a cycle is the product of these local
  /// derivatives, which makes it independent of the charts used.
  cplx local_derivative(cplx x, Chart in, Chart out) const {
    const auto& pn = padded_num_;
    const auto& pd = padded_den_;
    // Numerator/denominator of the chart expression as coefficient lists.
    auto eval_pair = [&](const std::vector<cplx>& c, cplx t, bool reversed) {
      cplx v{}, dv{};
      const int n = static_cast<int>(c.size()) - 1;
      for (int i = 0; i <= n; ++i) {
        const cplx ci = reversed ? c[static_cast<std::size_t>(i)] : c[static_cast<std::size_t>(n - i)];
        dv = dv * t + v;
        v = v * t + ci;
      }
      return std::pair{v, dv};
    };
    const bool rev = in == Chart::inverted;
    auto [p, dp] = eval_pair(pn, x, rev);
    auto [q, dq] = eval_pair(pd, x, rev);
    if (out == Chart::inverted) {
      std::swap(p, q);
      std::swap(dp, dq);
    }
    return (dp * q - p * dq) / (q * q);
  }

 private:
  std::vector<cplx> padded(const Polynomial& p) const {
    std::vector<cplx> v(static_cast<std::size_t>(degree_) + 1, cplx{});
    for (int i = 0; i <= p.degree(); ++i) v[static_cast<std::size_t>(i)] = p.coeff(i);
    return v;
  }

  static cplx horner(const std::vector<cplx>& c, cplx x) {
    cplx acc{};
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  static cplx horner_reversed(const std::vector<cplx>& c, cplx w) {
    cplx acc{};
    for (const auto& ci : c) acc = acc * w + ci;
    return acc;
  }

  void check_coprime() const;

  Polynomial num_;
  Polynomial den_;
  int degree_ = 0;
  std::vector<cplx> padded_num_;
  std::vector<cplx> padded_den_;
  double zero_cut_ = 0.0;
};

inline SpherePoint eval(const RationalMap& map, const SpherePoint& z) { return map(z); }

/// Formal derivative (P'Q - PQ') / Q^2, not reduced.
inline RationalFunction derivative(const RationalMap& map) {
  const auto& p = map.numerator();
  const auto& q = map.denominator();
  const Polynomial a = p.derivative() * q;
  const Polynomial b = p * q.derivative();
  return {a - b, q * q};
}

/// Critical points with multiplicity; the total is always 2d - 2. Infinity
/// receives whatever multiplicity the finite roots of P'Q - PQ' leave over.
inline RootSet critical_points(const RationalMap& map, const RootSolverOptions& opt = {}) {
  const Polynomial n = derivative(map).num;
  RootSet rs;
  if (n.degree() >= 1) rs = poly_roots(n, opt);
  const int at_infinity = 2 * map.degree() - 2 - std::max(n.degree(), 0);
  if (at_infinity > 0) rs.roots.push_back({SpherePoint::infinity(), at_infinity});
  return rs;
}

/// The d solutions of R(z) = w with multiplicity.
inline RootSet preimages(const RationalMap& map, const SpherePoint& w, const RootSolverOptions& opt = {}) {
  const auto& p = map.numerator();
  const auto& q = map.denominator();
  // For |w| > 1 solve Q - P/w = 0 instead of P - wQ = 0: same roots, bounded
  // coefficients, and w = infinity reduces to the roots of Q.
  // operator- trims against the larger operand, so a cancelled leading term
  // shows up as a degree drop (preimages at infinity).
  Polynomial f;
  if (w.is_finite() && std::abs(w.value()) <= 1.0) {
    f = p - w.value() * q;
  } else {
    const cplx c = w.is_infinity() ? cplx{} : 1.0 / w.value();
    f = q - c * p;
  }
  RootSet rs;
  if (f.degree() >= 1) rs = poly_roots(f, opt);
  const int at_infinity = map.degree() - std::max(f.degree(), 0);
  if (at_infinity > 0) rs.roots.push_back({SpherePoint::infinity(), at_infinity});
  return rs;
}

inline void RationalMap::check_coprime() const {
  if (num_.degree() < 1 || den_.degree() < 1) return;
  const auto rp = poly_roots(num_);
  const auto rq = poly_roots(den_);
  for (const auto& a : rp.roots) {
    for (const auto& b : rq.roots) {
      if (chordal_distance(a.point, b.point) < 1e-6) {
        throw CoprimalityViolation("numerator and denominator share a root");
      }
    }
  }
}

inline constexpr int kDefaultDegreeCap = 4096;

/// Coefficients of R^k through homogeneous composition
/// P_{j+1} = sum p_i P_j^i Q_j^(d-i), Q_{j+1} = sum q_i P_j^i Q_j^(d-i).
/// Both halves are rescaled by the largest denominator coefficient after each
/// step so polynomial maps keep denominator 1.
inline RationalMap iterate_map(const RationalMap& map, int k, int degree_cap = kDefaultDegreeCap) {
  if (k < 1) throw PreconditionViolation("iterate_map: k must be >= 1");
  const int d = map.degree();
  double total = 1.0;
  for (int i = 0; i < k; ++i) {
    total *= d;
    if (total > degree_cap) {
      throw DegreeCapExceeded("iterate_map: degree " + std::to_string(d) + "^" + std::to_string(k) +
                              " exceeds cap " + std::to_string(degree_cap));
    }
  }
  Polynomial pk = map.numerator();
  Polynomial qk = map.denominator();
  const auto& p = map.numerator();
  const auto& q = map.denominator();
  for (int step = 1; step < k; ++step) {
    std::vector<Polynomial> ppow{Polynomial({cplx{1.0}})};
    std::vector<Polynomial> qpow{Polynomial({cplx{1.0}})};
    for (int i = 1; i <= d; ++i) {
      ppow.push_back(ppow.back() * pk);
      qpow.push_back(qpow.back() * qk);
    }
    Polynomial np, nq;
    for (int i = 0; i <= d; ++i) {
      const Polynomial term = ppow[static_cast<std::size_t>(i)] * qpow[static_cast<std::size_t>(d - i)];
      if (p.coeff(i) != cplx{}) np = np + p.coeff(i) * term;
      if (q.coeff(i) != cplx{}) nq = nq + q.coeff(i) * term;
    }
    cplx norm{1.0};
    double best = 0.0;
    for (const auto& c : nq.coeffs()) {
      if (std::abs(c) > best) {
        best = std::abs(c);
        norm = c;
      }
    }
    pk = (1.0 / norm) * np;
    qk = (1.0 / norm) * nq;
  }
  return RationalMap(std::move(pk), std::move(qk));
}

/// h o R o h^{-1} for h(z) = a z + b.
inline RationalMap conjugate_affine(const RationalMap& map, cplx a, cplx b) {
  if (a == cplx{}) throw PreconditionViolation("conjugate_affine: a must be nonzero");
  const cplx ia = 1.0 / a;
  const Polynomial ph = map.numerator().compose_affine(ia, -b * ia);
  const Polynomial qh = map.denominator().compose_affine(ia, -b * ia);
  return RationalMap(a * ph + b * qh, qh);
}

}  // namespace mmelab
