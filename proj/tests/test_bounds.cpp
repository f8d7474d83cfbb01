#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "lab/bounds.hpp"

using namespace lab;
using Catch::Approx;

namespace {
const Geometry slab1{Domain::Slab, 2, 1.0};
const Geometry halfcyl{Domain::HalfCylinder, 2, 1.0};
const ModelOperator unit_op{1.0};

BoundarySymbol parity_table(int R, cplx even_slope, cplx odd_slope) {
  std::map<std::vector<int>, cplx> t;
  for (int k = -R; k <= R; ++k) {
    const double ang = std::sqrt(1.0 + double(k) * k);
    t[{k}] = (k % 2 == 0 ? even_slope : odd_slope) * ang;
  }
  return BoundarySymbol::tabulated(std::move(t), 1);
}
}  // namespace

TEST_CASE("symbol lower bound minimizes Re l <xi> over the lattice", "[bounds]") {
  Mode minimizer;
  CHECK(lower_bound_symbol(BoundarySymbol::robin(1.0), slab1, unit_op, 30.0, &minimizer) ==
        Approx(1.0).epsilon(1e-14));
  CHECK(minimizer.xi == std::vector<int>{0});

  auto l = l_symbol(Realization::robin(2.0), halfcyl, unit_op);
  CHECK(lower_bound_symbol(l, halfcyl, unit_op, 30.0) == Approx(3.0).epsilon(1e-14));

  auto twice = BoundarySymbol::derived(
      [](const Mode& m) { return cplx(2.0 * m.angle_bracket()); }, 1);
  CHECK(lower_bound_symbol(twice, halfcyl, unit_op, 30.0) == Approx(2.0).epsilon(1e-14));
}

TEST_CASE("q_mu scan on the half-cylinder", "[bounds]") {
  auto scan = q_mu_scan({-100.0}, halfcyl, unit_op, 200.0);
  REQUIRE(scan.size() == 1);
  CHECK(scan[0].bound == Approx(9.0498756211208903).margin(1e-12));
  CHECK(scan[0].minimizer_modulus == 0.0);
  CHECK_FALSE(scan[0].at_edge);

  // mu -> 0-: the obstruction vanishes
  auto tiny = q_mu_scan({-1e-6}, halfcyl, unit_op, 50.0);
  CHECK(tiny[0].bound > 0.0);
  CHECK(tiny[0].bound < 1e-5);

  // sqrt growth in |mu|
  auto grow = q_mu_scan({-1e2, -1e4}, halfcyl, unit_op, 200.0);
  CHECK(grow[1].bound / grow[0].bound > 9.0);
  CHECK(grow[1].bound >= 0.5 * std::sqrt(1e4));

  auto mono = q_mu_scan({-10.0, -100.0, -1000.0}, halfcyl, unit_op, 100.0);
  CHECK(q_mu_monotone(mono));
  auto broken = mono;
  std::swap(broken[0].bound, broken[2].bound);
  CHECK_FALSE(q_mu_monotone(broken));

  CHECK_THROWS_AS(q_mu_scan({-1.0, 2.0}, halfcyl, unit_op, 10.0), std::invalid_argument);

  // degenerate truncation: the minimizer saturates the edge and is flagged
  auto edge = q_mu_scan({-1.0}, halfcyl, unit_op, 0.4);
  CHECK(edge[0].at_edge);
}

TEST_CASE("Birman inequality for the Neumann slab realization", "[bounds]") {
  auto rep = birman_check(Realization::robin(0.0), slab1, unit_op, 5.0, 400);
  CHECK(rep.m_A_gamma == Approx(10.8696044010893586).margin(1e-5));
  CHECK(rep.m_realization == Approx(3.4674011002723397).margin(1e-5));
  CHECK(rep.m_L_minushalf == Approx(1.3130352854993313).margin(1e-12));
  CHECK(rep.hypothesis_ok);
  CHECK(rep.identification_conservative);
  CHECK(rep.inequality_ok);
  CHECK(rep.margin > 2.0);
  CHECK(rep.bound_rhs ==
        Approx(rep.m_L_minushalf * rep.m_A_gamma / (rep.m_L_minushalf + rep.m_A_gamma))
            .margin(1e-9));
  CHECK(rep.fd_error_estimate < 1e-3);
}

TEST_CASE("Birman inequality across a Robin sweep", "[bounds]") {
  for (double b : {-1.3, -0.65, 0.0, 2.0}) {
    auto rep = birman_check(Realization::robin(b), slab1, unit_op, 5.0, 400);
    CAPTURE(b);
    CHECK(rep.hypothesis_ok);
    CHECK(rep.inequality_ok);
    CHECK(rep.margin >= -rep.fd_error_estimate);
  }
}

TEST_CASE("Birman report for the empty-subset realization", "[bounds]") {
  Realization none{BoundarySymbol::robin(2.0), std::set<std::vector<int>>{}};
  auto rep = birman_check(none, slab1, unit_op, 3.0, 400);
  CHECK(rep.m_realization == Approx(rep.m_A_gamma).margin(1e-14));
  CHECK(rep.m_L_minushalf == 0.0);
  CHECK(rep.bound_rhs == 0.0);
  CHECK(rep.hypothesis_ok);
  CHECK(rep.inequality_ok);
  CHECK(rep.identification_conservative);
}

TEST_CASE("Birman check rejects complex Robin data", "[bounds]") {
  Realization cpx{BoundarySymbol::robin(cplx(1.0, 2.0)), std::nullopt};
  CHECK_THROWS_AS(birman_check(cpx, slab1, unit_op, 2.0, 200), std::invalid_argument);
}

TEST_CASE("Garding test passes Robin multipliers of either sign", "[bounds]") {
  for (double b : {3.0, -3.0}) {
    auto l = l_symbol(Realization::robin(b), halfcyl, unit_op);
    auto rep = garding_check(l, halfcyl, unit_op, 40.0, 200);
    CAPTURE(b);
    CHECK(rep.holds);
    CHECK(rep.symbol_holds);
    CHECK(rep.form_holds);
    CHECK(rep.symbol_holds == rep.form_holds);
    CHECK(rep.cp > 0.0);
    CHECK_FALSE(rep.witness.has_value());
  }
  // slab variants
  for (double b : {0.0, -2.0}) {
    auto l = l_symbol(Realization::robin(b), slab1, unit_op);
    auto rep = garding_check(l, slab1, unit_op, 40.0, 200);
    CAPTURE(b);
    CHECK(rep.holds);
    CHECK(rep.symbol_holds == rep.form_holds);
  }
}

TEST_CASE("Garding test on the first-order model multipliers", "[bounds]") {
  auto plus = BoundarySymbol::derived(
      [](const Mode& m) { return cplx(m.angle_bracket()); }, 1);
  auto rep = garding_check(plus, halfcyl, unit_op, 40.0, 200);
  CHECK(rep.holds);
  CHECK(rep.cp == Approx(1.0).epsilon(1e-14));
  CHECK(rep.kp == 0.0);
  CHECK(rep.form_holds);

  auto minus = BoundarySymbol::derived(
      [](const Mode& m) { return cplx(-m.angle_bracket()); }, 1);
  auto bad = garding_check(minus, halfcyl, unit_op, 40.0, 200);
  CHECK_FALSE(bad.holds);
  CHECK_FALSE(bad.symbol_holds);
  CHECK_FALSE(bad.form_holds);
  REQUIRE(bad.witness.has_value());
  CHECK(bad.witness->xi_norm() >= 20.0);
}

TEST_CASE("Garding test distinguishes parity-dependent tables", "[bounds]") {
  auto good = garding_check(parity_table(40, 1.0, 2.0), halfcyl, unit_op, 40.0, 200);
  CHECK(good.holds);
  CHECK(good.symbol_holds == good.form_holds);

  auto flip = garding_check(parity_table(40, 1.0, -1.0), halfcyl, unit_op, 40.0, 200);
  CHECK_FALSE(flip.holds);
  CHECK_FALSE(flip.symbol_holds);
  CHECK_FALSE(flip.form_holds);
  REQUIRE(flip.witness.has_value());
  CHECK(int(std::lround(flip.witness->xi_norm())) % 2 == 1);
}
