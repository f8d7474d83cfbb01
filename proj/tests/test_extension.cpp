#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <set>
#include <vector>

#include "lab/extension.hpp"

using namespace lab;
using Catch::Approx;

namespace {
const Geometry slab1{Domain::Slab, 2, 1.0};
const Geometry halfcyl{Domain::HalfCylinder, 2, 1.0};
const ModelOperator unit_op{1.0};
Mode mode(int k) { return make_mode({k}, unit_op); }

double rel_l2(const std::vector<cplx>& u, const std::vector<cplx>& v) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    num += std::norm(u[i] - v[i]);
    den += std::norm(v[i]);
  }
  return std::sqrt(num / std::max(den, 1e-300));
}
}  // namespace

TEST_CASE("boundary-operator symbol l = c - p0", "[extension]") {
  // half-cylinder, b = 0: l(0) = 0 - (-sqrt(a)) = 1
  auto l = l_symbol(Realization::robin(0.0), halfcyl, unit_op);
  CHECK(l(mode(0)).real() == Approx(1.0).epsilon(1e-14));
  CHECK(l(mode(2)).real() == Approx(std::sqrt(5.0)).epsilon(1e-14));
  CHECK(l.elliptic.has_value());
  CHECK(*l.elliptic);

  // slab, b = 2, shifted by lambda = -3: l^lambda(0) = 2 + 2 coth(2)
  auto lsh = shifted_l_symbol(Realization::robin(2.0), -3.0, slab1, unit_op);
  CHECK(lsh(mode(0)).real() == Approx(4.0746294414550962).epsilon(1e-14));

  // lambda = 0 shift is the identity
  auto l0 = l_symbol(Realization::robin(-1.5), slab1, unit_op);
  auto lsh0 = shifted_l_symbol(Realization::robin(-1.5), 0.0, slab1, unit_op);
  for (int k : {0, 1, 5}) CHECK(std::abs(l0(mode(k)) - lsh0(mode(k))) < 1e-14);

  // degenerate choice c = p0 kills the order-one part
  auto degenerate = Realization{
      BoundarySymbol::derived(
          [](const Mode& m) { return dtn_symbol(m, 0.0, slab1, unit_op); }, 1),
      std::nullopt};
  auto ldeg = l_symbol(degenerate, slab1, unit_op);
  REQUIRE(ldeg.elliptic.has_value());
  CHECK_FALSE(*ldeg.elliptic);
}

TEST_CASE("the lambda shift of l is a bounded perturbation", "[extension]") {
  // (l^lambda - l) <xi> = (p0 - p^lambda) <xi> stays below |lambda|/2 + slack
  auto l = l_symbol(Realization::robin(1.0), slab1, unit_op);
  auto lsh = shifted_l_symbol(Realization::robin(1.0), -3.0, slab1, unit_op);
  double sup = 0.0;
  for (int k = -40; k <= 40; ++k) {
    const Mode m = mode(k);
    sup = std::max(sup, std::abs(lsh(m) - l(m)) * m.angle_bracket());
  }
  CHECK((lsh(mode(0)) - l(mode(0))).real() == Approx(0.7615941559557649).epsilon(1e-13));
  CHECK(sup < 1.51);
  const Mode big = mode(2000);
  CHECK(std::abs(lsh(big) - l(big)) * big.angle_bracket() == Approx(1.5).epsilon(1e-4));
}

TEST_CASE("M-function values are -1/l^lambda on the sorted lattice", "[extension]") {
  auto s = m_function(Realization::robin(2.0), -3.0, 2.0, slab1, unit_op);
  REQUIRE(s.modes.size() == 5);
  CHECK(s.modes.front().xi == std::vector<int>{-2});
  CHECK(s.modes[2].xi == std::vector<int>{0});
  CHECK(s.values[2].real() == Approx(-0.24542109027781645).epsilon(1e-14));
  CHECK(s.values[2].imag() == 0.0);
  // even symmetry in the mode for a Robin condition
  CHECK(std::abs(s.values[0] - s.values[4]) < 1e-15);
}

TEST_CASE("M-function refuses lambda at a realization eigenvalue", "[extension]") {
  // b = -2 on the slab: l^lambda(0) vanishes at the Robin eigenvalue
  CHECK_THROWS_AS(m_function(Realization::robin(-2.0), -2.6672558244966513, 1.0, slab1, unit_op),
                  std::domain_error);
}

TEST_CASE("M-function has one-signed imaginary part and is holomorphic off the spectrum",
          "[extension]") {
  const Realization real = Realization::robin(2.0);
  auto mval = [&](cplx lam, const Mode& m) {
    return -1.0 / shifted_l_symbol(real, lam, slab1, unit_op)(m);
  };
  // with nu_1 = +d/dx inward, Im l^lambda = -Im p^lambda < 0 on the upper half
  // plane, so Im M = Im(l)/|l|^2 carries the opposite sign to Im lambda
  for (int k : {0, 1}) {
    CHECK(mval(cplx(-5.0, 2.0), mode(k)).imag() < 0.0);
    CHECK(mval(cplx(-5.0, -2.0), mode(k)).imag() > 0.0);
  }
  // mean-value test on a small circle: the K-point average reproduces the center
  const Mode m = mode(1);
  const cplx center(-5.0, 0.0);
  cplx mean = 0.0;
  const int K = 8;
  for (int j = 0; j < K; ++j) {
    const double th = 2.0 * pi() * j / K;
    mean += mval(center + 0.1 * cplx(std::cos(th), std::sin(th)), m);
  }
  mean /= double(K);
  CHECK(std::abs(mean - mval(center, m)) < 1e-13);
}

TEST_CASE("factored resolvent formula agrees with the FD oracle on the slab", "[extension]") {
  const Realization real = Realization::robin(2.0);
  const cplx lam(-5.0, 0.0);
  TrigPoly f;
  f.ell = 1.0;
  f.c = {0.7, -0.3, 0.1, 0.9};
  const int N = 2000;
  for (int k : {0, 3}) {
    const Mode m = mode(k);
    auto fc = [&](double x) { return cplx(f.at(x)); };
    auto uk = krein_apply_richardson(real, lam, m, fc, slab1.ell, N, slab1, unit_op);
    auto uo = oracle_solve_richardson(m, lam, FiberBC::robin(2.0), fc, 0.0, slab1.ell, N);
    CHECK(rel_l2(uk, uo) < 1e-8);
    // gamma_0 u = <f, k^lambda>/l^lambda in closed form
    const cplx coef = f.poisson_pairing(m, lam) /
                      shifted_l_symbol(real, lam, slab1, unit_op)(m);
    CHECK(std::abs(uk[0] - coef) < 1e-8);
  }
}

TEST_CASE("factored resolvent formula agrees with the FD oracle on the half-cylinder",
          "[extension]") {
  const Realization real = Realization::robin(1.0);
  const cplx lam(-5.0, 0.0);
  const Mode m = mode(1);
  auto fc = [](double x) { return cplx(std::exp(-2.0 * x) * (1.0 + 0.5 * std::sin(3.0 * x))); };
  const double len = fiber_length(m, lam, halfcyl);
  const int N = 2000;
  auto uk = krein_apply_richardson(real, lam, m, fc, len, N, halfcyl, unit_op);
  auto uo = oracle_solve_richardson(m, lam, FiberBC::robin(1.0), fc, 0.0, len, N);
  CHECK(rel_l2(uk, uo) < 1e-6);
}

TEST_CASE("modes outside the subset receive the Dirichlet resolvent", "[extension]") {
  Realization sub{BoundarySymbol::robin(2.0),
                  std::set<std::vector<int>>{std::vector<int>{0}}};
  TrigPoly f;
  f.ell = 1.0;
  f.c = {1.0, 0.5};
  const int N = 400;
  auto fgrid = f.grid(N);
  auto on = krein_apply_mode(sub, -2.0, mode(0), fgrid, 1.0, slab1, unit_op);
  CHECK(on.corrected);
  auto off = krein_apply_mode(sub, -2.0, mode(1), fgrid, 1.0, slab1, unit_op);
  CHECK_FALSE(off.corrected);
  auto dir = dirichlet_resolvent_grid(mode(1), -2.0, fgrid, slab1, 1.0);
  CHECK(rel_l2(off.u, dir) == 0.0);

  auto l = l_symbol(sub, slab1, unit_op);
  CHECK_THROWS_AS(l(mode(1)), std::domain_error);
  auto s = m_function(sub, -2.0, 5.0, slab1, unit_op);
  REQUIRE(s.modes.size() == 1);
  CHECK(s.modes[0].xi == std::vector<int>{0});

  // empty subset: the realization is A_gamma itself
  Realization none{BoundarySymbol::robin(2.0), std::set<std::vector<int>>{}};
  auto un = krein_apply_mode(none, -2.0, mode(0), fgrid, 1.0, slab1, unit_op);
  CHECK_FALSE(un.corrected);
  CHECK(m_function(none, -2.0, 5.0, slab1, unit_op).modes.empty());
}

TEST_CASE("large Robin coefficient collapses onto the Dirichlet realization", "[extension]") {
  auto s = m_function(Realization::robin(1e8), -1.0, 2.0, slab1, unit_op);
  for (const cplx& v : s.values) CHECK(std::abs(v) < 2e-8);
}

TEST_CASE("resolvent identity holds across two spectral points", "[extension]") {
  const Realization real = Realization::robin(0.5);
  const cplx l1(-2.0, 0.0), l2(-7.0, 0.0);
  const Mode m = mode(1);
  TrigPoly f;
  f.ell = 1.0;
  f.c = {1.0, -0.6, 0.3};
  auto fc = [&](double x) { return cplx(f.at(x)); };
  const int N = 1000;
  auto u1 = krein_apply_richardson(real, l1, m, fc, 1.0, N, slab1, unit_op);
  auto u2 = krein_apply_richardson(real, l2, m, fc, 1.0, N, slab1, unit_op);
  auto compose = [&](int n) {
    std::vector<cplx> fg(n + 1);
    for (int i = 0; i <= n; ++i) fg[i] = f.at(i * 1.0 / n);
    auto inner = krein_apply_mode(real, l2, m, fg, 1.0, slab1, unit_op).u;
    return krein_apply_mode(real, l1, m, inner, 1.0, slab1, unit_op).u;
  };
  auto cc = compose(N);
  auto cf = compose(2 * N);
  auto rr = richardson_combine(cc, cf);
  double worst = 0.0;
  for (int i = 0; i <= N; ++i)
    worst = std::max(worst, std::abs((u1[i] - u2[i]) - (l1 - l2) * rr[i]));
  CHECK(worst < 1e-7);
}

TEST_CASE("resolvent of the self-adjoint realization is symmetric", "[extension]") {
  const Realization real = Realization::robin(0.5);
  const cplx lam(-4.0, 0.0);
  const Mode m = mode(1);
  TrigPoly f, g;
  f.ell = g.ell = 1.0;
  f.c = {1.0, -0.6, 0.3};
  g.c = {0.2, 0.8, 0.0, -1.0};
  auto scal = [&](int n) {
    auto fg = f.grid(n), gg = g.grid(n);
    auto uf = krein_apply_mode(real, lam, m, fg, 1.0, slab1, unit_op).u;
    auto ug = krein_apply_mode(real, lam, m, gg, 1.0, slab1, unit_op).u;
    const double h = 1.0 / n;
    return std::abs(trapezoid_pair(uf, gg, h) - trapezoid_pair(fg, ug, h));
  };
  const double coarse = scal(1000), fine = scal(2000);
  CHECK(std::abs(4.0 * fine - coarse) / 3.0 < 1e-8);
}

TEST_CASE("reduced Green formula balances for generic data", "[extension]") {
  // slab: u vanishes at the far end only, w is the Poisson null solution
  const Mode ms = mode(2);
  auto us = [](double x) { return cplx((1.0 - x) * std::cos(2.0 * x)); };
  auto ws = [&](double x) { return poisson_kernel_at(ms, 0.0, slab1, x); };
  CHECK(reduced_green_residual(us, ws, ms, slab1, unit_op, 2000) < 1e-6);

  // u with gamma_0 u = 0: LHS reduces to nu_1 u times conj gamma_0 w
  auto u0 = [](double x) { return cplx(std::sin(pi() * x) * (1.0 + 0.3 * x)); };
  CHECK(reduced_green_residual(u0, ws, ms, slab1, unit_op, 2000) < 1e-6);

  // half-cylinder with decaying data
  const Mode mh = mode(1);
  auto uh = [](double x) { return cplx(std::exp(-2.0 * x) * (1.0 + 0.5 * x)); };
  auto wh = [&](double x) { return poisson_kernel_at(mh, 0.0, halfcyl, x); };
  CHECK(reduced_green_residual(uh, wh, mh, halfcyl, unit_op, 4000) < 1e-6);
}

TEST_CASE("shift diagram is exact at lambda = 0", "[extension]") {
  auto res = diagram_check(Realization::robin(2.0), 0.0, mode(1), 2000, slab1, unit_op);
  CHECK(res.null_residual < 1e-8);
  CHECK(res.pairing_residual == 0.0);
  CHECK(res.inversion_residual < 1e-14);
}

TEST_CASE("shift diagram closes at generic spectral points", "[extension]") {
  auto rs = diagram_check(Realization::robin(2.0), -4.5, mode(2), 2000, slab1, unit_op);
  CHECK(rs.null_residual < 1e-6);
  CHECK(rs.pairing_residual < 1e-6);
  CHECK(rs.inversion_residual < 1e-8);

  auto rh = diagram_check(Realization::robin(-0.5), cplx(-2.0, 0.5), mode(1), 8000, halfcyl,
                          unit_op);
  CHECK(rh.null_residual < 1e-6);
  CHECK(rh.pairing_residual < 1e-6);
  CHECK(rh.inversion_residual < 1e-8);
}

TEST_CASE("M-function poles match FD fiber eigenvalues", "[extension]") {
  // b = -2: the symbol root is the frozen Robin eigenvalue, and FD agrees
  auto root = shifted_symbol_root(Realization::robin(-2.0), mode(0), -50.0, 1.0, slab1,
                                  unit_op);
  REQUIRE(root.has_value());
  CHECK(*root == Approx(-2.6672558244966513).margin(1e-9));
  const double fd =
      fd_ground_state_richardson(mode(0), FiberBC::robin(-2.0), 1.0, 4000);
  CHECK(std::abs(fd - *root) < 1e-4);

  // deeper coefficient, deeper eigenvalue
  auto root4 = shifted_symbol_root(Realization::robin(-4.0), mode(0), -50.0, 1.0, slab1,
                                   unit_op);
  REQUIRE(root4.has_value());
  const double fd4 =
      fd_ground_state_richardson(mode(0), FiberBC::robin(-4.0), 1.0, 4000);
  CHECK(std::abs(fd4 - *root4) < 1e-4);

  // positive b: no root below msq, and the FD ground state sits above it
  auto none = shifted_symbol_root(Realization::robin(2.0), mode(0), -50.0, 1.0, slab1,
                                  unit_op);
  CHECK_FALSE(none.has_value());
  CHECK(fd_ground_state_richardson(mode(0), FiberBC::robin(2.0), 1.0, 2000) > 1.0);
}
