#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmelab/errors.hpp"
#include "mmelab/sphere.hpp"

namespace mmelab {

// Coefficients whose modulus is at most this fraction of the reference scale
// are treated as zero when the degree is determined.
inline constexpr double kCoefficientZero = 1e-13;

/// Dense polynomial with complex coefficients in ascending degree order.
/// Trailing coefficients below the zero threshold are trimmed on construction,
/// so `degree()` is always the index of the last retained coefficient.
class Polynomial {
 public:
  Polynomial() = default;

  explicit Polynomial(std::vector<cplx> coeffs) : Polynomial(std::move(coeffs), -1.0) {}

  Polynomial(std::initializer_list<cplx> coeffs) : Polynomial(std::vector<cplx>(coeffs)) {}

  /// Trims relative to `reference_scale` instead of the polynomial's own
  /// largest coefficient. Used after subtractions, where a cancelled leading
  /// term must be judged against the operands rather than the result.
  static Polynomial with_reference_scale(std::vector<cplx> coeffs, double reference_scale) {
    return Polynomial(std::move(coeffs), reference_scale);
  }

  static Polynomial monomial(cplx c, int power) {
    std::vector<cplx> v(static_cast<std::size_t>(power) + 1, cplx{});
    v.back() = c;
    return Polynomial(std::move(v));
  }

  int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
  bool is_zero() const noexcept { return coeffs_.empty(); }
  std::span<const cplx> coeffs() const noexcept { return coeffs_; }
  cplx coeff(int i) const noexcept {
    return (i >= 0 && i < static_cast<int>(coeffs_.size())) ? coeffs_[static_cast<std::size_t>(i)] : cplx{};
  }
  cplx leading() const noexcept { return coeffs_.empty() ? cplx{} : coeffs_.back(); }

  double max_modulus() const noexcept {
    double m = 0.0;
    for (const auto& c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  double l1_norm() const noexcept {
    double s = 0.0;
    for (const auto& c : coeffs_) s += std::abs(c);
    return s;
  }

  cplx operator()(cplx z) const noexcept {
    cplx acc{};
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * z + *it;
    return acc;
  }

  /// w^n p(1/w) for n >= degree: the polynomial read in the chart at infinity.
  cplx eval_reversed(cplx w, int n) const noexcept {
    cplx acc{};
    for (int i = 0; i <= n; ++i) acc = acc * w + coeff(i);
    return acc;
  }

  Polynomial derivative() const {
    if (coeffs_.size() <= 1) return {};
    std::vector<cplx> d(coeffs_.size() - 1);
    for (std::size_t i = 1; i < coeffs_.size(); ++i) d[i - 1] = coeffs_[i] * static_cast<double>(i);
    return Polynomial(std::move(d));
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<cplx> r(std::max(a.coeffs_.size(), b.coeffs_.size()));
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = a.coeff(static_cast<int>(i)) + b.coeff(static_cast<int>(i));
    return Polynomial(std::move(r), std::max(a.max_modulus(), b.max_modulus()));
  }

  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) {
    std::vector<cplx> r(std::max(a.coeffs_.size(), b.coeffs_.size()));
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = a.coeff(static_cast<int>(i)) - b.coeff(static_cast<int>(i));
    return Polynomial(std::move(r), std::max(a.max_modulus(), b.max_modulus()));
  }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<cplx> r(a.coeffs_.size() + b.coeffs_.size() - 1, cplx{});
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i) {
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j) r[i + j] += a.coeffs_[i] * b.coeffs_[j];
    }
    return Polynomial(std::move(r));
  }

  friend Polynomial operator*(cplx s, const Polynomial& p) {
    std::vector<cplx> r(p.coeffs_);
    for (auto& c : r) c *= s;
    return Polynomial(std::move(r));
  }

  /// Multiplication by z^k.
  Polynomial shifted(int k) const {
    if (is_zero()) return {};
    std::vector<cplx> r(static_cast<std::size_t>(k), cplx{});
    r.insert(r.end(), coeffs_.begin(), coeffs_.end());
    return Polynomial(std::move(r));
  }

  /// p(a z + b), by Horner's scheme over polynomials.
  Polynomial compose_affine(cplx a, cplx b) const {
    Polynomial lin(std::vector<cplx>{b, a});
    Polynomial acc;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
      acc = acc * lin + Polynomial(std::vector<cplx>{*it});
    }
    return acc;
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.coeffs_ == b.coeffs_; }

 private:
  Polynomial(std::vector<cplx> coeffs, double reference_scale) : coeffs_(std::move(coeffs)) {
    double scale = reference_scale;
    if (scale < 0.0) scale = max_modulus();
    const double cut = kCoefficientZero * scale;
    while (!coeffs_.empty() && std::abs(coeffs_.back()) <= cut) coeffs_.pop_back();
  }

  std::vector<cplx> coeffs_;
};

struct Root {
  SpherePoint point;
  int multiplicity = 1;
};

struct RootSet {
  std::vector<Root> roots;
  double residual = 0.0;  // max |p(root)| over finite roots

  int total_multiplicity() const {
    return std::accumulate(roots.begin(), roots.end(), 0,
                           [](int acc, const Root& r) { return acc + r.multiplicity; });
  }
};

struct RootSolverOptions {
  double tolerance = 1e-10;      // relative to the coefficient scale
  double cluster_radius = 1e-7;  // roots closer than this merge (scaled by max(1,|z|))
  int max_iterations = 600;
  int max_restarts = 4;
};

namespace detail {

struct NewtonStep {
  cplx ratio;       // p / p'
  double residual;  // |p(z)| / (sum |a_k|) in the better-conditioned chart
};

// p/p' evaluated in the chart where |z| <= 1, so high degrees do not overflow.
inline NewtonStep newton_step(std::span<const cplx> a, double l1, cplx z) {
  const int n = static_cast<int>(a.size()) - 1;
  if (std::abs(z) <= 1.0) {
    cplx p{}, dp{};
    for (int i = n; i >= 0; --i) {
      dp = dp * z + p;
      p = p * z + a[static_cast<std::size_t>(i)];
    }
    return {dp == cplx{} ? cplx{} : p / dp, std::abs(p) / l1};
  }
  const cplx w = 1.0 / z;
  cplx q{}, dq{};
  for (int i = 0; i <= n; ++i) {  // q(w) = sum a_i w^(n-i)
    dq = dq * w + q;
    q = q * w + a[static_cast<std::size_t>(i)];
  }
  const cplx den = static_cast<double>(n) * q - w * dq;
  return {den == cplx{} ? cplx{} : z * q / den, std::abs(q) / l1};
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double unit_from_bits(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline std::vector<cplx> initial_guesses(std::span<const cplx> a, int attempt) {
  const int n = static_cast<int>(a.size()) - 1;
  // Fujiwara-type bound: every root has modulus below `radius`.
  double radius = 0.0;
  const double lead = std::abs(a.back());
  for (int k = 0; k < n; ++k) {
    const double c = std::abs(a[static_cast<std::size_t>(k)]) / lead;
    if (c > 0.0) radius = std::max(radius, std::pow(c, 1.0 / (n - k)));
  }
  if (radius == 0.0) radius = 1.0;
  std::vector<cplx> z(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    double r = radius;
    double phase = 2.0 * std::numbers::pi * k / n + 0.4;
    if (attempt > 0) {
      const auto h = splitmix64((static_cast<std::uint64_t>(attempt) << 32) ^ static_cast<std::uint64_t>(k));
      r *= 0.5 + unit_from_bits(h);
      phase += 2.0 * std::numbers::pi * unit_from_bits(splitmix64(h));
    }
    z[static_cast<std::size_t>(k)] = std::polar(r, phase);
  }
  return z;
}

}  // namespace detail

/// All complex roots of `p` by Aberth-Ehrlich simultaneous iteration.
/// Roots closer than the cluster radius are merged into one root carrying the
/// summed multiplicity. Throws RootSolveFailure when no attempt reaches the
/// residual tolerance.
inline RootSet poly_roots(const Polynomial& p, const RootSolverOptions& opt = {}) {
  const int n = p.degree();
  if (n < 1) throw PreconditionViolation("poly_roots: degree must be >= 1");
  const auto a = p.coeffs();
  const double l1 = p.l1_norm();

  std::vector<cplx> z;
  double worst = 0.0;
  if (n == 1) {
    z = {-a[0] / a[1]};
  } else {
    bool ok = false;
    for (int attempt = 0; attempt <= opt.max_restarts && !ok; ++attempt) {
      z = detail::initial_guesses(a, attempt);
      std::vector<char> done(static_cast<std::size_t>(n), 0);
      for (int it = 0; it < opt.max_iterations; ++it) {
        bool all_done = true;
        for (int i = 0; i < n; ++i) {
          auto ui = static_cast<std::size_t>(i);
          if (done[ui]) continue;
          const auto step = detail::newton_step(a, l1, z[ui]);
          if (step.residual == 0.0) {
            done[ui] = 1;
            continue;
          }
          cplx sum{};
          for (int j = 0; j < n; ++j) {
            if (j != i) {
              const cplx diff = z[ui] - z[static_cast<std::size_t>(j)];
              if (diff != cplx{}) sum += 1.0 / diff;
            }
          }
          const cplx corr = step.ratio / (1.0 - step.ratio * sum);
          if (!std::isfinite(corr.real()) || !std::isfinite(corr.imag())) continue;
          z[ui] -= corr;
          if (std::abs(corr) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(z[ui])) {
            done[ui] = 1;
          } else {
            all_done = false;
          }
        }
        if (all_done) break;
      }
      worst = 0.0;
      for (const auto& zi : z) worst = std::max(worst, detail::newton_step(a, l1, zi).residual);
      ok = worst <= opt.tolerance;
    }
    if (!ok) {
      throw RootSolveFailure("poly_roots: degree " + std::to_string(n) + " residual " +
                             std::to_string(worst) + " above tolerance");
    }
  }

  // Merge clusters (union-find over the n^2 pairs; n stays small here).
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  // Inclusion radii: every root of p lies in the union of the discs
  // D(z_i, n |p(z_i)| / |a_n prod_{j != i} (z_i - z_j)|). Near a multiple root
  // the approximations spread far beyond the cluster radius, but their discs
  // still overlap, so overlapping discs merge too.
  std::vector<double> incl(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const cplx zi = z[static_cast<std::size_t>(i)];
    double bound = 0.0, zk = 1.0;
    for (const auto& c : a) {
      bound += std::abs(c) * zk;
      zk *= std::abs(zi);
    }
    const double val = std::max(std::abs(p(zi)), std::numeric_limits<double>::epsilon() * bound);
    double den = std::abs(a.back());
    for (int j = 0; j < n; ++j) {
      if (j != i) den *= std::abs(zi - z[static_cast<std::size_t>(j)]);
    }
    incl[static_cast<std::size_t>(i)] = den > 0.0 ? n * val / den : std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const cplx zi = z[static_cast<std::size_t>(i)];
      const cplx zj = z[static_cast<std::size_t>(j)];
      const double d = std::abs(zi - zj);
      if (d <= opt.cluster_radius * std::max(1.0, std::abs(zi)) ||
          d <= incl[static_cast<std::size_t>(i)] + incl[static_cast<std::size_t>(j)]) {
        parent[static_cast<std::size_t>(find(i))] = find(j);
      }
    }
  }
  std::vector<cplx> sums(static_cast<std::size_t>(n), cplx{});
  std::vector<int> counts(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    sums[static_cast<std::size_t>(r)] += z[static_cast<std::size_t>(i)];
    counts[static_cast<std::size_t>(r)] += 1;
  }
  RootSet out;
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (counts[ui] == 0) continue;
    cplx root = sums[ui] / static_cast<double>(counts[ui]);
    if (counts[ui] > 1) {
      // A root of multiplicity m is a simple root of the (m-1)-th derivative.
      Polynomial d = p;
      for (int k = 1; k < counts[ui]; ++k) d = d.derivative();
      const Polynomial dd = d.derivative();
      double best = std::abs(d(root));
      for (int it = 0; it < 20 && best > 0.0; ++it) {
        const cplx slope = dd(root);
        if (slope == cplx{}) break;
        const cplx next = root - d(root) / slope;
        const double r = std::abs(d(next));
        if (!(r < best)) break;
        root = next;
        best = r;
      }
    }
    out.roots.push_back({SpherePoint(root), counts[ui]});
    out.residual = std::max(out.residual, std::abs(p(root)));
  }
  return out;
}

}  // namespace mmelab
