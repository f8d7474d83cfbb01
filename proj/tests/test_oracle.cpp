#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "lab/oracle.hpp"

using namespace lab;
using Catch::Approx;

namespace {
const ModelOperator unit_op{1.0};
Mode mode(int k) { return make_mode({k}, unit_op); }

double flux_richardson(const Mode& m, cplx lambda, const FiberBC& bc, cplx g, double len,
                       int N) {
  std::vector<cplx> fc(N + 1, 0.0), ff(2 * N + 1, 0.0);
  auto uc = oracle_solve(m, lambda, bc, fc, g, len, N);
  auto uf = oracle_solve(m, lambda, bc, ff, g, len, 2 * N);
  const cplx pc = nu1_one_sided(uc, len / N);
  const cplx pf = nu1_one_sided(uf, len / (2 * N));
  return ((4.0 * pf - pc) / 3.0).real();
}
}  // namespace

TEST_CASE("FD oracle reproduces the constant-load Dirichlet solution", "[oracle]") {
  // -u'' + u = 1 on (0,1), u(0) = u(1) = 0: u(1/2) = 1 - 1/cosh(1/2)
  const int N = 1000;
  auto u = oracle_solve_richardson(mode(0), 0.0, FiberBC::dirichlet(),
                                   [](double) { return cplx(1.0); }, 0.0, 1.0, N);
  CHECK(u[N / 2].real() == Approx(0.11318111602992609).margin(1e-9));
  CHECK(u[N / 2].imag() == 0.0);
  CHECK(std::abs(u[0]) == 0.0);
}

TEST_CASE("FD oracle reproduces the constant-load Neumann solution", "[oracle]") {
  // -u'' + u = 1, u'(0) = 0, u(1) = 0: u(0) = 1 - 1/cosh(1)
  const int N = 1000;
  auto u = oracle_solve_richardson(mode(0), 0.0, FiberBC::robin(0.0),
                                   [](double) { return cplx(1.0); }, 0.0, 1.0, N);
  CHECK(u[0].real() == Approx(0.35194572633611460).margin(1e-9));
}

TEST_CASE("numeric boundary flux of the null solution matches the DtN symbol", "[oracle]") {
  const Geometry slab{Domain::Slab, 2, 1.0};
  const Geometry hc{Domain::HalfCylinder, 2, 1.0};
  for (int k : {0, 1, 3}) {
    const Mode m = mode(k);
    for (double lam : {0.0, -3.0, -11.0}) {
      const double ps = flux_richardson(m, lam, FiberBC::dirichlet(), 1.0, 1.0, 1600);
      CHECK(ps == Approx(dtn_symbol(m, lam, slab, unit_op).real()).margin(2e-7));
      const double len = fiber_length(m, lam, hc);
      const double ph = flux_richardson(m, lam, FiberBC::dirichlet(), 1.0, len, 1600);
      CHECK(ph == Approx(dtn_symbol(m, lam, hc, unit_op).real()).margin(2e-7));
    }
  }
}

TEST_CASE("oracle error contracts at the second-order Richardson rate", "[oracle]") {
  TrigPoly f;
  f.ell = 1.0;
  f.c = {1.0, 0.5, -0.75};
  const Mode m = mode(1);
  const cplx lam(-2.5, 0.0);
  auto exact_at = [&](int N) { return f.resolvent_grid(m, lam, N); };
  auto err = [&](int N) {
    std::vector<cplx> fs(N + 1);
    for (int i = 0; i <= N; ++i) fs[i] = f.at(i * 1.0 / N);
    auto u = oracle_solve(m, lam, FiberBC::dirichlet(), fs, 0.0, 1.0, N);
    auto ex = exact_at(N);
    double w = 0.0;
    for (int i = 0; i <= N; ++i) w = std::max(w, std::abs(u[i] - ex[i]));
    return w;
  };
  const double ratio = err(200) / err(400);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("FD Dirichlet spectrum recovers a + (k pi/ell)^2", "[oracle]") {
  auto ev = fiber_eigenvalues_richardson(mode(0), FiberBC::dirichlet(), 1.0, 1000, 3);
  REQUIRE(ev.size() == 3);
  CHECK(ev[0] == Approx(1.0 + pi() * pi()).margin(1e-8));
  CHECK(ev[1] == Approx(1.0 + 4.0 * pi() * pi()).margin(1e-7));
  CHECK(ev[2] == Approx(1.0 + 9.0 * pi() * pi()).margin(1e-6));
}

TEST_CASE("linear eigenfunction of the Robin row is resolved exactly", "[oracle]") {
  // b = -1, ell = 1: u = 1 - x satisfies the ghost-eliminated scheme exactly,
  // so the discrete ground state sits at a for every N.
  for (int N : {50, 400}) {
    CHECK(fd_ground_state(mode(0), FiberBC::robin(-1.0), 1.0, N) ==
          Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("Sturm bisection agrees with the dense symmetric eigensolver", "[oracle]") {
  struct Case {
    FiberBC bc;
    double len;
  };
  for (const Case& c : {Case{FiberBC::dirichlet(), 1.0}, Case{FiberBC::robin(2.0), 1.0},
                        Case{FiberBC::robin(-3.0), 10.0}}) {
    for (int k : {0, 2}) {
      const double sturm = fd_ground_state(mode(k), c.bc, c.len, 500);
      const double dense = fiber_eigenvalues(mode(k), c.bc, c.len, 500, 1)[0];
      CHECK(sturm == Approx(dense).margin(1e-8));
    }
  }
}

TEST_CASE("half-cylinder Robin bound state lands at a - b^2", "[oracle]") {
  // b = -2, a = 1: the only discrete eigenvalue is -3
  const double len = half_cylinder_cut(2.0);
  const double e = fd_ground_state_richardson(mode(0), FiberBC::robin(-2.0), len, 2000);
  CHECK(e == Approx(-3.0).margin(1e-6));
}

TEST_CASE("Sturm count on a decoupled diagonal matrix", "[oracle]") {
  const std::vector<double> diag{1.0, 2.0, 3.0};
  const std::vector<double> sub{0.0, 0.0};
  CHECK(detail::sturm_count_below(diag, sub, 2.5) == 2);
  CHECK(detail::sturm_count_below(diag, sub, 0.5) == 0);
  CHECK(detail::tridiag_min_eigen(diag, sub) == Approx(1.0).margin(1e-12));
}

TEST_CASE("degenerate inputs are rejected", "[oracle]") {
  // singular factorization: [[1,1],[1,1]]
  Tridiag<cplx> M;
  M.dd = {1.0, 1.0};
  M.dl = {1.0};
  M.du = {1.0};
  CHECK_THROWS_AS(M.factor(), std::domain_error);

  CHECK_THROWS_AS(fiber_eigenvalues(mode(0), FiberBC::robin(cplx(0.0, 1.0)), 1.0, 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(fd_ground_state(mode(0), FiberBC::robin(cplx(0.0, 1.0)), 1.0, 100),
                  std::invalid_argument);
  std::vector<cplx> wrong(10, 0.0);
  CHECK_THROWS_AS(oracle_solve(mode(0), 0.0, FiberBC::dirichlet(), wrong, 0.0, 1.0, 100),
                  std::invalid_argument);
}
