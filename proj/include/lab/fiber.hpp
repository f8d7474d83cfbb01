#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "geometry.hpp"

namespace lab {

inline constexpr double pi() { return 3.141592653589793238462643383279502884; }

/// coth(z) computed through e^{-2z} so that large Re z never overflows.
inline cplx coth_stable(cplx z) {
  const cplx e = std::exp(-2.0 * z);
  return (1.0 + e) / (1.0 - e);
}

inline void require_offcut(const Mode& mode, cplx lambda, const Geometry& geom,
                           const ModelOperator& op, const char* who) {
  if (lambda.imag() != 0.0) return;
  const double lr = lambda.real();
  if (lr < op.msq) return;
  std::string msg(who);
  if (geom.domain == Domain::Slab && lr >= mode.a) {
    const double w = std::sqrt(lr - mode.a) * geom.ell / pi();
    const long k = std::lround(w);
    if (k >= 1 && std::abs(lr - mode.a - double(k) * double(k) * pi() * pi() / (geom.ell * geom.ell)) <
                      1e-9 * std::max(1.0, std::abs(lr))) {
      msg += ": lambda hits a Dirichlet fiber eigenvalue (pole) at mode " + mode.label();
      throw std::domain_error(msg);
    }
  }
  msg += ": real lambda >= msq lies on the branch cut / continuous spectrum";
  throw std::domain_error(msg);
}

/// Dirichlet-to-Neumann symbol of the fiber problem at boundary x = 0,
/// with the interior-pointing conormal nu = +d/dx:
///   half-cylinder  p(lambda) = -kappa
///   slab           p(lambda) = -kappa coth(kappa ell)
inline cplx dtn_symbol(const Mode& mode, cplx lambda, const Geometry& geom,
                       const ModelOperator& op) {
  require_offcut(mode, lambda, geom, op, "dtn_symbol");
  const cplx k = mode.kappa(lambda);
  if (geom.domain == Domain::HalfCylinder) return -k;
  return -k * coth_stable(k * geom.ell);
}

/// d p / d lambda in closed form; equals the squared L2 norm of the Poisson
/// kernel when lambda is real below the fiber branch point.
inline cplx dtn_derivative(const Mode& mode, cplx lambda, const Geometry& geom,
                           const ModelOperator& op) {
  require_offcut(mode, lambda, geom, op, "dtn_derivative");
  const cplx k = mode.kappa(lambda);
  if (geom.domain == Domain::HalfCylinder) return 1.0 / (2.0 * k);
  const cplx c = coth_stable(k * geom.ell);
  return (c + k * geom.ell * (1.0 - c * c)) / (2.0 * k);
}

/// Fiber Poisson kernel k^lambda, the null solution with boundary value 1:
/// exp(-kappa x) on the half-cylinder, sinh(kappa(ell-x))/sinh(kappa ell) on the slab.
inline cplx poisson_kernel_at(const Mode& mode, cplx lambda, const Geometry& geom, double x) {
  const cplx k = mode.kappa(lambda);
  if (geom.domain == Domain::HalfCylinder) return std::exp(-k * x);
  const double L = geom.ell;
  return std::exp(-k * x) * (1.0 - std::exp(-2.0 * k * (L - x))) / (1.0 - std::exp(-2.0 * k * L));
}

/// ||k^lambda||^2 over the fiber interval, lambda real below the branch point.
inline double poisson_normsq(const Mode& mode, double lambda, const Geometry& geom,
                             const ModelOperator& op) {
  (void)op;
  const double k = mode.kappa_real(lambda);
  if (geom.domain == Domain::HalfCylinder) return 1.0 / (2.0 * k);
  const double x = k * geom.ell;
  const double num = -std::expm1(-4.0 * x) - 4.0 * x * std::exp(-2.0 * x);
  const double den = 2.0 * k * std::expm1(-2.0 * x) * std::expm1(-2.0 * x);
  return num / den;
}

/// <k^{l1}, conj-paired k^{l2}> = (p(l1) - p(l2))/(l1 - l2); coincident
/// arguments fall back to the derivative formula.
inline cplx poisson_cross(const Mode& mode, cplx l1, cplx l2, const Geometry& geom,
                          const ModelOperator& op) {
  if (std::abs(l1 - l2) < 1e-12 * (1.0 + std::abs(l1)))
    return dtn_derivative(mode, l1, geom, op);
  return (dtn_symbol(mode, l1, geom, op) - dtn_symbol(mode, l2, geom, op)) / (l1 - l2);
}

/// Truncation point for half-cylinder grids; tail weight is O(e^{-20}).
inline double half_cylinder_cut(double kappa_re) {
  const double k = std::max(kappa_re, 1e-8);
  return std::max(10.0 / k, 10.0);
}

/// Fiber length actually discretized: ell for the slab, the truncation cut otherwise.
inline double fiber_length(const Mode& mode, cplx lambda, const Geometry& geom) {
  if (geom.domain == Domain::Slab) return geom.ell;
  return half_cylinder_cut(mode.kappa(lambda).real());
}

/// k^lambda sampled on the uniform grid x_i = i*len/N, i = 0..N.
inline std::vector<cplx> poisson_kernel_grid(const Mode& mode, cplx lambda, const Geometry& geom,
                                             int N, double len) {
  const cplx k = mode.kappa(lambda);
  std::vector<cplx> out(N + 1);
  const double h = len / N;
  if (geom.domain == Domain::HalfCylinder) {
    for (int i = 0; i <= N; ++i) out[i] = std::exp(-k * (i * h));
  } else {
    const cplx den = 1.0 - std::exp(-2.0 * k * geom.ell);
    for (int i = 0; i <= N; ++i) {
      const double x = i * h;
      out[i] = std::exp(-k * x) * (1.0 - std::exp(-2.0 * k * (geom.ell - x))) / den;
    }
  }
  return out;
}

/// Trapezoid quadrature of sum_i conj-free f_i g_i on the uniform grid (plain
/// bilinear pairing; callers conjugate an argument when they need a sesquilinear one).
inline cplx trapezoid_pair(const std::vector<cplx>& f, const std::vector<cplx>& g, double h) {
  if (f.size() != g.size() || f.size() < 2)
    throw std::invalid_argument("trapezoid_pair: mismatched grids");
  cplx s = 0.5 * (f.front() * g.front() + f.back() * g.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i] * g[i];
  return s * h;
}

inline double trapezoid_normsq(const std::vector<cplx>& f, double h) {
  double s = 0.5 * (std::norm(f.front()) + std::norm(f.back()));
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += std::norm(f[i]);
  return s * h;
}

/// Dirichlet fiber resolvent u = (A_gamma(xi) - lambda)^{-1} f on the uniform grid,
/// evaluated by the stable two-sweep variation-of-parameters scheme (composite
/// trapezoid against the exact Green function, O(N) work, |e^{-kappa h}| <= 1).
inline std::vector<cplx> dirichlet_resolvent_grid(const Mode& mode, cplx lambda,
                                                  const std::vector<cplx>& f,
                                                  const Geometry& geom, double len) {
  const int N = static_cast<int>(f.size()) - 1;
  if (N < 2) throw std::invalid_argument("dirichlet_resolvent_grid: need at least 3 nodes");
  const cplx k = mode.kappa(lambda);
  const double h = len / N;
  const cplx em = std::exp(-k * h);
  std::vector<cplx> phih(N + 1), u(N + 1);
  for (int i = 0; i <= N; ++i) phih[i] = 0.5 * (1.0 - std::exp(-2.0 * k * (i * h)));

  // T1(x) = int_0^x e^{-kappa(x-y)} phih(y) f(y) dy
  std::vector<cplx> T1(N + 1, 0.0);
  for (int i = 1; i <= N; ++i)
    T1[i] = em * T1[i - 1] + 0.5 * h * (em * phih[i - 1] * f[i - 1] + phih[i] * f[i]);

  if (geom.domain == Domain::HalfCylinder) {
    // T2(x) = int_x^cut e^{-kappa(y-x)} f(y) dy
    std::vector<cplx> T2(N + 1, 0.0);
    for (int i = N - 1; i >= 0; --i)
      T2[i] = em * T2[i + 1] + 0.5 * h * (em * f[i + 1] + f[i]);
    for (int i = 0; i <= N; ++i) u[i] = (T1[i] + phih[i] * T2[i]) / k;
    u[N] = 0.0;  // truncated end is pinned
    return u;
  }

  std::vector<cplx> psih(N + 1);
  for (int i = 0; i <= N; ++i) psih[i] = 0.5 * (1.0 - std::exp(-2.0 * k * (len - i * h)));
  std::vector<cplx> T2(N + 1, 0.0);
  for (int i = N - 1; i >= 0; --i)
    T2[i] = em * T2[i + 1] + 0.5 * h * (em * psih[i + 1] * f[i + 1] + psih[i] * f[i]);
  const cplx den = k * 0.5 * (1.0 - std::exp(-2.0 * k * len));
  for (int i = 0; i <= N; ++i) u[i] = (psih[i] * T1[i] + phih[i] * T2[i]) / den;
  u[0] = 0.0;
  u[N] = 0.0;
  return u;
}

/// Dirichlet Green function of the fiber problem, for spot checks.
inline cplx dirichlet_green(const Mode& mode, cplx lambda, const Geometry& geom,
                            double x, double y) {
  const cplx k = mode.kappa(lambda);
  const double lo = std::min(x, y), hi = std::max(x, y);
  if (geom.domain == Domain::HalfCylinder) {
    // sinh(kappa lo) e^{-kappa hi} / kappa, scaled through e^{-kappa(hi-lo)}
    return std::exp(-k * (hi - lo)) * (1.0 - std::exp(-2.0 * k * lo)) / (2.0 * k);
  }
  const double L = geom.ell;
  const cplx den = k * (1.0 - std::exp(-2.0 * k * L));
  return std::exp(-k * (hi - lo)) * (1.0 - std::exp(-2.0 * k * lo)) *
         (1.0 - std::exp(-2.0 * k * (L - hi))) / (2.0 * den);
}

/// Finite sine sum f(x) = sum_k c_k sin(k pi x / ell) on the slab fiber; every
/// quantity the engine needs from it has an exact expression.
struct TrigPoly {
  std::vector<double> c;  // c[k-1] multiplies sin(k pi x / ell)
  double ell = 1.0;

  double omega(int k1) const { return k1 * pi() / ell; }

  double at(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * std::sin(omega(int(k) + 1) * x);
    return s;
  }

  std::vector<cplx> grid(int N) const {
    std::vector<cplx> out(N + 1);
    for (int i = 0; i <= N; ++i) out[i] = at(i * ell / N);
    return out;
  }

  double normsq() const {
    double s = 0.0;
    for (double ck : c) s += ck * ck;
    return s * ell / 2.0;
  }

  /// Exact resolvent: (A_gamma(xi) - lambda)^{-1} maps sin(omega x) to
  /// sin(omega x)/(a - lambda + omega^2).
  std::vector<cplx> resolvent_grid(const Mode& mode, cplx lambda, int N) const {
    std::vector<cplx> out(N + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double w = omega(int(k) + 1);
      const cplx amp = c[k] / (cplx(mode.a) - lambda + w * w);
      for (int i = 0; i <= N; ++i) out[i] += amp * std::sin(w * (i * ell / N));
    }
    return out;
  }

  /// Exact pairing with the Poisson kernel: int sin(omega x) k^lambda dx =
  /// omega/(omega^2 + kappa^2).
  cplx poisson_pairing(const Mode& mode, cplx lambda) const {
    const cplx k2 = cplx(mode.a) - lambda;  // kappa^2
    cplx s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double w = omega(int(k) + 1);
      s += c[k] * w / (w * w + k2);
    }
    return s;
  }

  /// Exact boundary flux of the resolvent: nu_1 R f = int f k^lambda dx.
  cplx resolvent_flux(const Mode& mode, cplx lambda) const { return poisson_pairing(mode, lambda); }
};

}  // namespace lab
