#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "fiber.hpp"
#include "geometry.hpp"

namespace lab {

/// Boundary condition at x = 0 for the fiber oracle; the far end (x = ell, or
/// the half-cylinder truncation cut) is always homogeneous Dirichlet.
struct FiberBC {
  enum class Kind { Dirichlet, Robin };
  Kind kind = Kind::Dirichlet;
  cplx c = 0.0;  // Robin: u'(0) = c u(0) + g

  static FiberBC dirichlet() { return {Kind::Dirichlet, 0.0}; }
  static FiberBC robin(cplx c) { return {Kind::Robin, c}; }
};

/// Prefactored tridiagonal LU (no pivoting; the FD matrices here are strictly
/// diagonally dominant away from eigenvalues, and a vanishing pivot is reported).
template <class T>
struct Tridiag {
  std::vector<T> dl, dd, du;  // sub, main, super

  void factor() {
    const std::size_t n = dd.size();
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(dd[i - 1]) < 1e-300)
        throw std::domain_error("Tridiag: vanishing pivot (lambda near a discrete FD eigenvalue)");
      const T m = dl[i - 1] / dd[i - 1];
      dl[i - 1] = m;
      dd[i] -= m * du[i - 1];
    }
    if (std::abs(dd[n - 1]) < 1e-300)
      throw std::domain_error("Tridiag: vanishing pivot (lambda near a discrete FD eigenvalue)");
  }

  void solve(std::vector<T>& rhs) const {
    const std::size_t n = dd.size();
    for (std::size_t i = 1; i < n; ++i) rhs[i] -= dl[i - 1] * rhs[i - 1];
    rhs[n - 1] /= dd[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - du[i] * rhs[i + 1]) / dd[i];
  }
};

/// Second-order one-sided derivative at the boundary node.
inline cplx nu1_one_sided(const std::vector<cplx>& u, double h) {
  return (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
}

/// FD matrix for (A(xi) - lambda) on nodes 0..N-1 with u_N = 0; the Robin row
/// comes from second-order ghost elimination of u'(0) = c u(0) + g.
inline Tridiag<cplx> fd_matrix_c(double a, cplx lambda, const FiberBC& bc, double h, int N) {
  Tridiag<cplx> M;
  M.dd.assign(N, cplx(2.0 / (h * h)) + (cplx(a) - lambda));
  M.dl.assign(N - 1, cplx(-1.0 / (h * h)));
  M.du.assign(N - 1, cplx(-1.0 / (h * h)));
  if (bc.kind == FiberBC::Kind::Robin) {
    M.dd[0] += 2.0 * bc.c / h;
    M.du[0] = cplx(-2.0 / (h * h));
  }
  M.factor();
  return M;
}

/// Direct FD solve of the fiber boundary value problem
///   (A(xi) - lambda) u = f on (0, len), far end pinned,
///   u(0) = g (Dirichlet) or u'(0) = c u(0) + g (Robin),
/// on the uniform grid x_i = i len/N. This path never touches the closed forms.
inline std::vector<cplx> oracle_solve(const Mode& mode, cplx lambda, const FiberBC& bc,
                                      const std::vector<cplx>& f, cplx g, double len, int N) {
  if (static_cast<int>(f.size()) != N + 1)
    throw std::invalid_argument("oracle_solve: f must be sampled on the N+1 node grid");
  const double h = len / N;
  std::vector<cplx> u(N + 1, 0.0);
  if (bc.kind == FiberBC::Kind::Dirichlet) {
    // unknowns at nodes 1..N-1
    Tridiag<cplx> M;
    M.dd.assign(N - 1, cplx(2.0 / (h * h)) + (cplx(mode.a) - lambda));
    M.dl.assign(N - 2, cplx(-1.0 / (h * h)));
    M.du.assign(N - 2, cplx(-1.0 / (h * h)));
    M.factor();
    std::vector<cplx> rhs(f.begin() + 1, f.end() - 1);
    rhs[0] += g / (h * h);
    M.solve(rhs);
    u[0] = g;
    for (int i = 1; i < N; ++i) u[i] = rhs[i - 1];
    return u;
  }
  auto M = fd_matrix_c(mode.a, lambda, bc, h, N);
  std::vector<cplx> rhs(f.begin(), f.end() - 1);
  rhs[0] -= 2.0 * g / h;
  M.solve(rhs);
  for (int i = 0; i < N; ++i) u[i] = rhs[i];
  return u;
}

/// (4 u_{2N} - u_N)/3 on the coarse grid: eliminates the O(h^2) error term.
inline std::vector<cplx> richardson_combine(const std::vector<cplx>& coarse,
                                            const std::vector<cplx>& fine) {
  if (fine.size() != 2 * coarse.size() - 1)
    throw std::invalid_argument("richardson_combine: fine grid must halve the coarse one");
  std::vector<cplx> out(coarse.size());
  for (std::size_t i = 0; i < coarse.size(); ++i)
    out[i] = (4.0 * fine[2 * i] - coarse[i]) / 3.0;
  return out;
}

/// Oracle solve with (N, 2N) Richardson extrapolation, result on the N grid.
/// f is sampled analytically on both grids through the callable.
template <class F>
std::vector<cplx> oracle_solve_richardson(const Mode& mode, cplx lambda, const FiberBC& bc,
                                          F&& f, cplx g, double len, int N) {
  std::vector<cplx> fc(N + 1), ff(2 * N + 1);
  for (int i = 0; i <= N; ++i) fc[i] = f(i * len / N);
  for (int i = 0; i <= 2 * N; ++i) ff[i] = f(i * len / (2 * N));
  auto uc = oracle_solve(mode, lambda, bc, fc, g, len, N);
  auto uf = oracle_solve(mode, lambda, bc, ff, g, len, 2 * N);
  return richardson_combine(uc, uf);
}

/// Lowest eigenvalues of the FD fiber operator with a self-adjoint boundary
/// condition, via the symmetrized tridiagonal pencil. Robin requires real c.
inline std::vector<double> fiber_eigenvalues(const Mode& mode, const FiberBC& bc, double len,
                                             int N, int count) {
  const double h = len / N;
  Eigen::VectorXd diag, sub;
  if (bc.kind == FiberBC::Kind::Dirichlet) {
    const int m = N - 1;
    diag = Eigen::VectorXd::Constant(m, 2.0 / (h * h) + mode.a);
    sub = Eigen::VectorXd::Constant(m - 1, -1.0 / (h * h));
  } else {
    if (bc.c.imag() != 0.0)
      throw std::invalid_argument("fiber_eigenvalues: Robin coefficient must be real");
    const int m = N;
    diag = Eigen::VectorXd::Constant(m, 2.0 / (h * h) + mode.a);
    sub = Eigen::VectorXd::Constant(m - 1, -1.0 / (h * h));
    // mass-weighted symmetrization of the ghost-eliminated boundary row
    diag[0] = 2.0 / (h * h) + 2.0 * bc.c.real() / h + mode.a;
    sub[0] = -std::sqrt(2.0) / (h * h);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  count = std::min<int>(count, static_cast<int>(diag.size()));
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + count);
  return out;
}

/// Eigenvalues with (N, 2N) Richardson refinement applied per index.
inline std::vector<double> fiber_eigenvalues_richardson(const Mode& mode, const FiberBC& bc,
                                                        double len, int N, int count) {
  auto ec = fiber_eigenvalues(mode, bc, len, N, count);
  auto ef = fiber_eigenvalues(mode, bc, len, 2 * N, count);
  for (std::size_t i = 0; i < ec.size(); ++i) ec[i] = (4.0 * ef[i] - ec[i]) / 3.0;
  return ec;
}

namespace detail {

/// Number of eigenvalues of the symmetric tridiagonal (diag, sub) below x,
/// by the Sturm sign count of the LDL^T pivots.
inline int sturm_count_below(const std::vector<double>& diag, const std::vector<double>& sub,
                             double x) {
  int count = 0;
  double d = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double off = i == 0 ? 0.0 : sub[i - 1];
    d = (diag[i] - x) - off * off / d;
    if (d == 0.0) d = -1e-300;
    if (d < 0.0) ++count;
  }
  return count;
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
inline double tridiag_min_eigen(const std::vector<double>& diag,
                                const std::vector<double>& sub) {
  double lo = diag[0], hi = diag[0];
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double r = (i > 0 ? std::abs(sub[i - 1]) : 0.0) +
                     (i + 1 < diag.size() ? std::abs(sub[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count_below(diag, sub, mid) >= 1)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Ground state of the FD fiber pencil, same discretization as
/// fiber_eigenvalues but through an independent Sturm-bisection path; O(N).
inline double fd_ground_state(const Mode& mode, const FiberBC& bc, double len, int N) {
  const double h = len / N;
  std::vector<double> diag, sub;
  if (bc.kind == FiberBC::Kind::Dirichlet) {
    diag.assign(N - 1, 2.0 / (h * h) + mode.a);
    sub.assign(N - 2, -1.0 / (h * h));
  } else {
    if (bc.c.imag() != 0.0)
      throw std::invalid_argument("fd_ground_state: Robin coefficient must be real");
    diag.assign(N, 2.0 / (h * h) + mode.a);
    sub.assign(N - 1, -1.0 / (h * h));
    diag[0] = 2.0 / (h * h) + 2.0 * bc.c.real() / h + mode.a;
    sub[0] = -std::sqrt(2.0) / (h * h);
  }
  return detail::tridiag_min_eigen(diag, sub);
}

inline double fd_ground_state_richardson(const Mode& mode, const FiberBC& bc, double len,
                                         int N, double* step_change = nullptr) {
  const double ec = fd_ground_state(mode, bc, len, N);
  const double ef = fd_ground_state(mode, bc, len, 2 * N);
  if (step_change) *step_change = std::abs(ef - ec);
  return (4.0 * ef - ec) / 3.0;
}

}  // namespace lab
