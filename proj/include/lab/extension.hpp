#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fiber.hpp"
#include "geometry.hpp"
#include "oracle.hpp"

namespace lab {

/// Boundary symbol c(xi): Robin constant, polynomial in |xi|, a mode table, or a
/// value derived from another symbol (shifts, differences).
struct BoundarySymbol {
  enum class Kind { RobinConstant, PolynomialInModulus, Tabulated, Derived };

  Kind kind = Kind::RobinConstant;
  int order = 0;
  std::function<cplx(const Mode&)> eval;
  std::optional<bool> elliptic;  // set when the construction determines it

  cplx operator()(const Mode& m) const { return eval(m); }

  static BoundarySymbol robin(cplx b) {
    BoundarySymbol s;
    s.kind = Kind::RobinConstant;
    s.order = 0;
    s.eval = [b](const Mode&) { return b; };
    return s;
  }

  /// c(xi) = sum_k coeff[k] |xi|^k, order = degree.
  static BoundarySymbol poly_modulus(std::vector<cplx> coeff) {
    BoundarySymbol s;
    s.kind = Kind::PolynomialInModulus;
    s.order = coeff.empty() ? 0 : static_cast<int>(coeff.size()) - 1;
    if (s.order > 1) throw std::invalid_argument("BoundarySymbol: order tag must be <= 1");
    s.eval = [c = std::move(coeff)](const Mode& m) {
      cplx v = 0.0, p = 1.0;
      const double r = m.xi_norm();
      for (cplx ck : c) {
        v += ck * p;
        p *= r;
      }
      return v;
    };
    return s;
  }

  static BoundarySymbol tabulated(std::map<std::vector<int>, cplx> table, int order = 0) {
    BoundarySymbol s;
    s.kind = Kind::Tabulated;
    s.order = order;
    s.eval = [t = std::move(table)](const Mode& m) {
      auto it = t.find(m.xi);
      if (it == t.end())
        throw std::domain_error("BoundarySymbol: tabulated symbol missing mode " + m.label());
      return it->second;
    };
    return s;
  }

  static BoundarySymbol derived(std::function<cplx(const Mode&)> f, int order) {
    BoundarySymbol s;
    s.kind = Kind::Derived;
    s.order = order;
    s.eval = std::move(f);
    return s;
  }
};

/// A closed realization between A_min and A_max: the boundary condition
/// nu_1 u = C gamma_0 u on the modes of S, homogeneous Dirichlet off S.
struct Realization {
  BoundarySymbol C;
  std::optional<std::set<std::vector<int>>> modeSubset;  // nullopt: all modes

  bool in_subset(const Mode& m) const {
    return !modeSubset || modeSubset->count(m.xi) > 0;
  }

  static Realization robin(cplx b) { return {BoundarySymbol::robin(b), std::nullopt}; }
};

/// l(xi) = c(xi) - p0(xi), the symbol of the boundary operator the realization
/// corresponds to. Defined on the realization's mode subset.
inline BoundarySymbol l_symbol(const Realization& real, const Geometry& geom,
                               const ModelOperator& op) {
  geom.validate();
  op.validate();
  BoundarySymbol s = BoundarySymbol::derived(
      [real, geom, op](const Mode& m) {
        if (!real.in_subset(m))
          throw std::domain_error("l_symbol: mode " + m.label() +
                                  " lies outside the realization's mode subset");
        return real.C(m) - dtn_symbol(m, 0.0, geom, op);
      },
      1);
  // a Robin-type condition keeps the order-1 DtN part intact, so it is elliptic;
  // the degenerate choice c = p0 (l identically 0) is not
  if (real.C.kind == BoundarySymbol::Kind::RobinConstant ||
      (real.C.kind == BoundarySymbol::Kind::PolynomialInModulus && real.C.order == 0)) {
    s.elliptic = true;
  } else {
    // probe the tail growth of |l|/<xi> along the first axis
    double tail = 1e300;
    for (int r : {256, 1024, 4096, 16384}) {
      std::vector<int> xi(geom.n - 1, 0);
      xi[0] = r;
      Mode m = make_mode(xi, op);
      try {
        tail = std::min(tail, std::abs(s(m)) / m.angle_bracket());
      } catch (const std::domain_error&) {
        return s;  // subset-limited or tabulated: leave the flag unset
      }
    }
    s.elliptic = tail > 1e-8;
  }
  return s;
}

/// l^lambda(xi) = c(xi) - p^lambda(xi) = l + (p0 - p^lambda).
inline BoundarySymbol shifted_l_symbol(const Realization& real, cplx lambda, const Geometry& geom,
                                       const ModelOperator& op) {
  return BoundarySymbol::derived(
      [real, lambda, geom, op](const Mode& m) {
        if (!real.in_subset(m))
          throw std::domain_error("shifted_l_symbol: mode " + m.label() +
                                  " lies outside the realization's mode subset");
        return real.C(m) - dtn_symbol(m, lambda, geom, op);
      },
      1);
}

/// One sample of the M-function: per-mode values -1/l^lambda on the truncated lattice.
struct MFunctionSample {
  cplx lambda;
  std::vector<Mode> modes;   // sorted lexicographically
  std::vector<cplx> values;  // aligned with modes
};

inline MFunctionSample m_function(const Realization& real, cplx lambda, double R,
                                  const Geometry& geom, const ModelOperator& op) {
  auto lsh = shifted_l_symbol(real, lambda, geom, op);
  MFunctionSample out;
  out.lambda = lambda;
  for (const Mode& m : lattice_modes(geom, op, R)) {
    if (!real.in_subset(m)) continue;
    const cplx lv = lsh(m);
    if (std::abs(lv) < 1e-10 * m.angle_bracket())
      throw std::domain_error("m_function: lambda is (near) an eigenvalue of the realization; "
                              "l^lambda vanishes at mode " + m.label());
    out.modes.push_back(m);
    out.values.push_back(-1.0 / lv);
  }
  return out;
}

/// Mode-resolved right-hand side: f sampled on the fiber grid of each mode.
struct FiberData {
  Mode mode;
  std::vector<cplx> f;  // nodes 0..N
};

struct FiberSolution {
  Mode mode;
  std::vector<cplx> u;
  double len = 0.0;  // fiber interval actually used
  bool corrected = false;  // whether the rank-one term was applied
};

/// Resolvent of the realization through the factored resolvent-difference formula:
///   u = R_gamma^lambda f + k^lambda (1/l^lambda) <f, adjoint Poisson kernel>,
/// modes off the subset receiving only the Dirichlet part.
inline FiberSolution krein_apply_mode(const Realization& real, cplx lambda, const Mode& mode,
                                      const std::vector<cplx>& f, double len,
                                      const Geometry& geom, const ModelOperator& op) {
  FiberSolution sol;
  sol.mode = mode;
  sol.len = len;
  sol.u = dirichlet_resolvent_grid(mode, lambda, f, geom, len);
  if (!real.in_subset(mode)) return sol;
  const cplx lv = shifted_l_symbol(real, lambda, geom, op)(mode);
  if (std::abs(lv) < 1e-10 * mode.angle_bracket())
    throw std::domain_error("krein_apply: lambda is (near) an eigenvalue at mode " + mode.label());
  const int N = static_cast<int>(f.size()) - 1;
  const double h = len / N;
  auto kgrid = poisson_kernel_grid(mode, lambda, geom, N, len);
  // A formally self-adjoint: the adjoint kernel at conj(lambda), conjugated back,
  // is k^lambda itself, so the pairing is bilinear
  const cplx coef = trapezoid_pair(f, kgrid, h) / lv;
  for (int i = 0; i <= N; ++i) sol.u[i] += coef * kgrid[i];
  sol.corrected = true;
  return sol;
}

inline std::vector<FiberSolution> krein_apply(const Realization& real, cplx lambda,
                                              const std::vector<FiberData>& data,
                                              const Geometry& geom, const ModelOperator& op) {
  std::vector<FiberSolution> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    const double len = fiber_length(d.mode, lambda, geom);
    out.push_back(krein_apply_mode(real, lambda, d.mode, d.f, len, geom, op));
  }
  return out;
}

/// krein_apply with (N, 2N) Richardson extrapolation; f supplied analytically.
template <class F>
std::vector<cplx> krein_apply_richardson(const Realization& real, cplx lambda, const Mode& mode,
                                         F&& f, double len, int N, const Geometry& geom,
                                         const ModelOperator& op) {
  std::vector<cplx> fc(N + 1), ff(2 * N + 1);
  for (int i = 0; i <= N; ++i) fc[i] = f(i * len / N);
  for (int i = 0; i <= 2 * N; ++i) ff[i] = f(i * len / (2 * N));
  auto uc = krein_apply_mode(real, lambda, mode, fc, len, geom, op).u;
  auto uf = krein_apply_mode(real, lambda, mode, ff, len, geom, op).u;
  return richardson_combine(uc, uf);
}

/// Reduced Green's formula residual |(Au, w) - (Gamma u, gamma_0 w)| for a fiber
/// null solution w, with Gamma u = nu_1 u - p0 gamma_0 u. Both sides are evaluated
/// by FD/quadrature at (N/2, N) with Richardson extrapolation; the closed forms
/// enter only through the p0 scalar.
template <class FU, class FW>
double reduced_green_residual(FU&& u, FW&& w, const Mode& mode, const Geometry& geom,
                              const ModelOperator& op, int N) {
  const double len = fiber_length(mode, 0.0, geom);
  const cplx p0 = dtn_symbol(mode, 0.0, geom, op);
  auto eval_sides = [&](int n) -> std::pair<cplx, cplx> {
    const double h = len / n;
    std::vector<cplx> uu(n + 1), ww(n + 1);
    for (int i = 0; i <= n; ++i) {
      uu[i] = u(i * h);
      ww[i] = w(i * h);
    }
    // Au = -u'' + a u by central FD; one-sided second-order stencils at the ends
    std::vector<cplx> Au(n + 1);
    for (int i = 1; i < n; ++i)
      Au[i] = -(uu[i - 1] - 2.0 * uu[i] + uu[i + 1]) / (h * h) + mode.a * uu[i];
    Au[0] = -(2.0 * uu[0] - 5.0 * uu[1] + 4.0 * uu[2] - uu[3]) / (h * h) + mode.a * uu[0];
    Au[n] = -(2.0 * uu[n] - 5.0 * uu[n - 1] + 4.0 * uu[n - 2] - uu[n - 3]) / (h * h) +
            mode.a * uu[n];
    std::vector<cplx> wconj(ww);
    for (auto& v : wconj) v = std::conj(v);
    const cplx lhs = trapezoid_pair(Au, wconj, h);
    const cplx gamma_u = uu[0];
    const cplx nu_u = nu1_one_sided(uu, h);
    const cplx rhs = (nu_u - p0 * gamma_u) * std::conj(ww[0]);
    return {lhs, rhs};
  };
  auto [lc, rc] = eval_sides(N / 2);
  auto [lf, rf] = eval_sides(N);
  const cplx lhs = (4.0 * lf - lc) / 3.0;
  const cplx rhs = (4.0 * rf - rc) / 3.0;
  return std::abs(lhs - rhs);
}

struct DiagramResiduals {
  double null_residual = 0.0;       // (A - lambda) E^lambda z, relative
  double pairing_residual = 0.0;    // <(T + G^lambda) z, z> against the shifted form
  double inversion_residual = 0.0;  // F^lambda E^lambda z back to z, relative
};

/// Fiber-level consistency of the lambda-shift diagram: with z the normalized
/// null solution (gamma_0 z = 1), E^lambda z = z + lambda (A_gamma - lambda)^{-1} z
/// must be a null solution of A - lambda, the pairing identity
/// l - lambda <E^lambda z, z> = l^lambda must hold, and F^lambda inverts E^lambda.
inline DiagramResiduals diagram_check(const Realization& real, cplx lambda, const Mode& mode,
                                      int N, const Geometry& geom, const ModelOperator& op) {
  if (!real.in_subset(mode))
    throw std::domain_error("diagram_check: mode outside the realization's subset");
  double len = fiber_length(mode, 0.0, geom);
  if (geom.domain == Domain::HalfCylinder) {
    len = std::max(len, fiber_length(mode, lambda, geom));
    // the truncated end pins the resolvent to zero, leaving an absolute defect
    // ~ e^{-kappa len} that the five-point stencil amplifies by 1/h^2; resolve
    // the slowest decay rate far enough that the defect sits below every gate
    const double slowest = std::min(mode.kappa(0.0).real(), mode.kappa(lambda).real());
    len = std::max(len, 25.0 / slowest);
  }

  struct Pass {
    std::vector<cplx> E;
    cplx pair;                // <E^lambda z, z>
    std::vector<cplx> FE;    // F^lambda E^lambda z
  };
  auto run = [&](int n) -> Pass {
    Pass p;
    auto z = poisson_kernel_grid(mode, 0.0, geom, n, len);
    auto Rz = dirichlet_resolvent_grid(mode, lambda, z, geom, len);
    p.E.resize(n + 1);
    for (int i = 0; i <= n; ++i) p.E[i] = z[i] + lambda * Rz[i];
    const double h = len / n;
    std::vector<cplx> zc(z);
    for (auto& v : zc) v = std::conj(v);
    p.pair = trapezoid_pair(p.E, zc, h);
    auto R0E = dirichlet_resolvent_grid(mode, 0.0, p.E, geom, len);
    p.FE.resize(n + 1);
    for (int i = 0; i <= n; ++i) p.FE[i] = p.E[i] - lambda * R0E[i];
    return p;
  };
  Pass coarse = run(N / 2);
  Pass fine = run(N);

  DiagramResiduals res;
  // (i) interior null residual of E^lambda z on the fine grid, relative scale;
  // the five-point stencil keeps its own truncation bias below the solve error
  // it is certifying
  {
    const double h = len / N;
    double num = 0.0, den = 0.0;
    for (int i = 2; i + 2 <= N; ++i) {
      const cplx lap = (-fine.E[i - 2] + 16.0 * fine.E[i - 1] - 30.0 * fine.E[i] +
                        16.0 * fine.E[i + 1] - fine.E[i + 2]) /
                       (12.0 * h * h);
      const cplx d = -lap + (cplx(mode.a) - lambda) * fine.E[i];
      num += std::norm(d);
      den += std::norm((cplx(mode.a) - lambda) * fine.E[i]);
    }
    res.null_residual = std::sqrt(num / std::max(den, 1e-300));
  }
  // (ii) pairing identity with Richardson on the quadrature scalar
  {
    const cplx pair = (4.0 * fine.pair - coarse.pair) / 3.0;
    const cplx l0 = l_symbol(real, geom, op)(mode);
    const cplx lsh = shifted_l_symbol(real, lambda, geom, op)(mode);
    res.pairing_residual = std::abs((l0 - lambda * pair) - lsh) / mode.angle_bracket();
  }
  // (iii) inversion with Richardson on the composed vector
  {
    auto FE = richardson_combine(coarse.FE, fine.FE);
    auto z = poisson_kernel_grid(mode, 0.0, geom, N / 2, len);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < FE.size(); ++i) {
      num += std::norm(FE[i] - z[i]);
      den += std::norm(z[i]);
    }
    res.inversion_residual = std::sqrt(num / den);
  }
  return res;
}

/// Real root of l^lambda(mode) = 0 on (lo, hi), hi <= msq: l^lambda is strictly
/// decreasing in lambda, so bisection on a sign change settles it.
inline std::optional<double> shifted_symbol_root(const Realization& real, const Mode& mode,
                                                 double lo, double hi, const Geometry& geom,
                                                 const ModelOperator& op) {
  hi = std::min(hi, op.msq - 1e-11);
  auto g = [&](double lam) {
    return (real.C(mode) - dtn_symbol(mode, lam, geom, op)).real();
  };
  double glo = g(lo), ghi = g(hi);
  if (!(glo > 0.0 && ghi < 0.0)) return std::nullopt;  // decreasing: root needs glo>0>ghi
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm > 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lab
