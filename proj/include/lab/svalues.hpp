#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "extension.hpp"
#include "fiber.hpp"
#include "geometry.hpp"
#include "oracle.hpp"
#include "parallel.hpp"

namespace lab {

/// Descending singular values with the mode that produced each entry, so any
/// entry can be recomputed from its source exactly.
struct SingularValueSeries {
  std::vector<double> values;
  std::vector<Mode> source_modes;  // aligned with values
  std::string provenance;
  double truncation_R = 0.0;

  std::size_t size() const { return values.size(); }
};

struct FitResult {
  double exponent = 0.0;
  double constant = 0.0;
  std::size_t window_lo = 0, window_hi = 0;  // half-open index range, 0-based
  double residual = 0.0;                     // max relative deviation on the window
  double plateau = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/// Sort (value, mode) pairs descending by value with a lexicographic mode
/// tie-break, so series are byte-deterministic.
inline void sort_series(SingularValueSeries& s) {
  std::vector<std::size_t> idx(s.values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    if (s.values[i] != s.values[j]) return s.values[i] > s.values[j];
    return s.source_modes[i].xi < s.source_modes[j].xi;
  });
  SingularValueSeries out;
  out.values.reserve(idx.size());
  out.source_modes.reserve(idx.size());
  for (std::size_t i : idx) {
    out.values.push_back(s.values[i]);
    out.source_modes.push_back(s.source_modes[i]);
  }
  s.values = std::move(out.values);
  s.source_modes = std::move(out.source_modes);
}

}  // namespace detail

/// Closed-form s-value of the rank-one per-mode difference (realization vs
/// Dirichlet): s = ||k^lambda||^2 / |l^lambda|; modes off the subset contribute 0.
inline double svalue_vs_dirichlet_mode(const Realization& real, double lambda, const Mode& mode,
                                       const Geometry& geom, const ModelOperator& op) {
  if (!real.in_subset(mode)) return 0.0;
  const cplx lv = real.C(mode) - dtn_symbol(mode, lambda, geom, op);
  if (std::abs(lv) < 1e-10 * mode.angle_bracket())
    throw std::domain_error("svalues_vs_dirichlet: lambda is (near) an eigenvalue at mode " +
                            mode.label());
  return poisson_normsq(mode, lambda, geom, op) / std::abs(lv);
}

inline SingularValueSeries svalues_vs_dirichlet(const Realization& real, double lambda, double R,
                                                const Geometry& geom, const ModelOperator& op) {
  if (!(lambda < op.msq))
    throw std::invalid_argument("svalues_vs_dirichlet: lambda must be real below msq");
  auto modes = lattice_modes(geom, op, R);
  SingularValueSeries s;
  s.values.resize(modes.size());
  s.source_modes = modes;
  std::vector<std::string> errors(modes.size());
  parallel_for(modes.size(), [&](std::size_t i) {
    try {
      s.values[i] = svalue_vs_dirichlet_mode(real, lambda, modes[i], geom, op);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw std::domain_error(e);
  s.truncation_R = R;
  s.provenance = "resolvent difference vs Dirichlet, R=" + std::to_string(R);
  detail::sort_series(s);
  return s;
}

/// Two Robin realizations compared: s = ||k^lambda||^2 |b2-b1| / (|l1^lambda| |l2^lambda|).
inline SingularValueSeries svalues_robin_pair(double b1, double b2, double lambda, double R,
                                              const Geometry& geom, const ModelOperator& op) {
  if (!(lambda < op.msq))
    throw std::invalid_argument("svalues_robin_pair: lambda must be real below msq");
  auto modes = lattice_modes(geom, op, R);
  SingularValueSeries s;
  s.values.resize(modes.size());
  s.source_modes = modes;
  std::vector<std::string> errors(modes.size());
  parallel_for(modes.size(), [&](std::size_t i) {
    const Mode& m = modes[i];
    const double p = dtn_symbol(m, lambda, geom, op).real();
    const double l1 = b1 - p, l2 = b2 - p;
    if (std::min(std::abs(l1), std::abs(l2)) < 1e-10 * m.angle_bracket()) {
      errors[i] = "svalues_robin_pair: lambda is (near) an eigenvalue at mode " + m.label();
      return;
    }
    s.values[i] = poisson_normsq(m, lambda, geom, op) * std::abs(b2 - b1) /
                  (std::abs(l1) * std::abs(l2));
  });
  for (const auto& e : errors)
    if (!e.empty()) throw std::domain_error(e);
  s.truncation_R = R;
  s.provenance = "Robin pair difference, R=" + std::to_string(R);
  detail::sort_series(s);
  return s;
}

/// Singular values of B = Atilde^{-Np} - A_gamma^{-Np} on one fiber, computed
/// through the FD oracle. B has rank <= Np (the resolvent difference is rank one),
/// so B = sum_i R_rob^i Delta R_dir^{Np-1-i} is assembled in factored form and the
/// singular values come from a thin QR plus a small dense SVD. Quadrature weights
/// (trapezoid, half weight at the boundary node) enter as the W^{1/2} B W^{-1/2}
/// similarity that represents the L2 operator.
inline std::vector<double> iterate_mode_svalues(const Mode& mode, double robin_c, int Np,
                                                int gridN, const Geometry& geom) {
  if (geom.domain != Domain::Slab)
    throw std::invalid_argument("iterate_mode_svalues: slab geometry required");
  const int N = gridN;
  const double h = geom.ell / N;

  Tridiag<double> rob;
  rob.dd.assign(N, 2.0 / (h * h) + mode.a);
  rob.dl.assign(N - 1, -1.0 / (h * h));
  rob.du.assign(N - 1, -1.0 / (h * h));
  rob.dd[0] += 2.0 * robin_c / h;
  rob.du[0] = -2.0 / (h * h);
  rob.factor();

  Tridiag<double> dir;
  dir.dd.assign(N - 1, 2.0 / (h * h) + mode.a);
  dir.dl.assign(N - 2, -1.0 / (h * h));
  dir.du.assign(N - 2, -1.0 / (h * h));
  dir.factor();

  auto apply_rob = [&](std::vector<double> v) {
    rob.solve(v);
    return v;
  };
  auto apply_dir = [&](const std::vector<double>& v) {
    std::vector<double> w(v.begin() + 1, v.end());
    dir.solve(w);
    std::vector<double> out(N, 0.0);
    for (int i = 1; i < N; ++i) out[i] = w[i - 1];
    return out;
  };

  // Delta = R_rob - R_dir is rank one and self-adjoint in the trapezoid inner
  // product (the Robin row is W-symmetrizable, not Euclidean-symmetric):
  // Delta = <., Dg>_W Dg / <g, Dg>_W
  std::vector<double> g(N, 1.0);
  auto Dg = apply_rob(g);
  {
    auto d = apply_dir(g);
    for (int i = 0; i < N; ++i) Dg[i] -= d[i];
  }
  double gdg = -0.5 * Dg[0];  // trapezoid half-weight at the boundary node
  for (int i = 0; i < N; ++i) gdg += Dg[i];
  const double cfac = 1.0 / gdg;

  Eigen::MatrixXd X(N, Np), Y(N, Np);
  for (int p = 0; p < Np; ++p) {
    std::vector<double> x = Dg;
    for (int q = 0; q < p; ++q) x = apply_rob(std::move(x));
    std::vector<double> y = Dg;
    for (int q = 0; q < Np - 1 - p; ++q) y = apply_dir(y);
    for (int i = 0; i < N; ++i) {
      X(i, p) = cfac * x[i];
      Y(i, p) = y[i];
    }
  }
  // both factors carry W^{1/2}: B = cfac sum x_p <., y_p>_W, so
  // W^{1/2} B W^{-1/2} = cfac sum (W^{1/2} x_p)(W^{1/2} y_p)^T
  const double s0 = std::sqrt(0.5);  // node-0 weight ratio
  X.row(0) *= s0;
  Y.row(0) *= s0;

  Eigen::HouseholderQR<Eigen::MatrixXd> qx(X), qy(Y);
  Eigen::MatrixXd Rx = qx.matrixQR().topRows(Np).triangularView<Eigen::Upper>();
  Eigen::MatrixXd Ry = qy.matrixQR().topRows(Np).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Rx * Ry.transpose());
  std::vector<double> out(svd.singularValues().data(), svd.singularValues().data() + Np);
  return out;
}

/// Richardson-refined per-mode iterate singular values at grids (N/2, N).
inline std::vector<double> iterate_mode_svalues_richardson(const Mode& mode, double robin_c,
                                                           int Np, int gridN,
                                                           const Geometry& geom) {
  auto sf = iterate_mode_svalues(mode, robin_c, Np, gridN, geom);
  auto sc = iterate_mode_svalues(mode, robin_c, Np, gridN / 2, geom);
  for (std::size_t i = 0; i < sf.size(); ++i) sf[i] = (4.0 * sf[i] - sc[i]) / 3.0;
  return sf;
}

/// Series of per-mode dominant singular values of Atilde^{-Np} - A_gamma^{-Np}
/// (one entry per lattice point; the largest per mode dominates its fiber).
inline SingularValueSeries svalues_iterates(const Realization& real, int Np, double R,
                                            const Geometry& geom, const ModelOperator& op,
                                            int gridN) {
  if (Np < 1 || Np > 3) throw std::invalid_argument("svalues_iterates: N must be 1, 2 or 3");
  if (geom.domain != Domain::Slab)
    throw std::invalid_argument("svalues_iterates: slab geometry required");
  auto modes = lattice_modes(geom, op, R);
  SingularValueSeries s;
  s.values.resize(modes.size());
  s.source_modes = modes;
  std::vector<std::string> errors(modes.size());
  parallel_for(modes.size(), [&](std::size_t i) {
    try {
      if (!real.in_subset(modes[i])) {
        s.values[i] = 0.0;
        return;
      }
      const cplx c = real.C(modes[i]);
      if (c.imag() != 0.0)
        throw std::invalid_argument("svalues_iterates: self-adjoint (real) condition required");
      s.values[i] =
          iterate_mode_svalues_richardson(modes[i], c.real(), Np, gridN, geom)[0];
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error(e);
  s.truncation_R = R;
  s.provenance = "iterate difference, N=" + std::to_string(Np) + ", R=" + std::to_string(R) +
                 ", grid=" + std::to_string(gridN);
  detail::sort_series(s);
  return s;
}

/// Least-squares power-law fit over the tail window [len/2, 0.9 len).
/// expectedExponent, when given, is the positive decay power used for the
/// plateau estimate median(s_j * j^expectedExponent).
inline FitResult weyl_fit(const SingularValueSeries& series,
                          std::optional<double> expectedExponent = std::nullopt) {
  const std::size_t n = series.size();
  if (n < 200) throw std::invalid_argument("weyl_fit: series length must be >= 200");
  FitResult fit;
  fit.window_lo = n / 2;
  fit.window_hi = (9 * n) / 10;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double cnt = double(fit.window_hi - fit.window_lo);
  for (std::size_t i = fit.window_lo; i < fit.window_hi; ++i) {
    const double s = series.values[i];
    if (!(s > 0.0)) throw std::domain_error("weyl_fit: zero s-value inside the fit window");
    const double x = std::log(double(i + 1)), y = std::log(s);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  fit.constant = std::exp((sy - fit.exponent * sx) / cnt);
  for (std::size_t i = fit.window_lo; i < fit.window_hi; ++i) {
    const double model = fit.constant * std::pow(double(i + 1), fit.exponent);
    fit.residual = std::max(fit.residual, std::abs(series.values[i] - model) / model);
  }
  if (expectedExponent) {
    // plateau of s_j j^{|e|}; the expected exponent may be given as the slope
    const double w = std::abs(*expectedExponent);
    std::vector<double> prod;
    prod.reserve(fit.window_hi - fit.window_lo);
    for (std::size_t i = fit.window_lo; i < fit.window_hi; ++i)
      prod.push_back(series.values[i] * std::pow(double(i + 1), w));
    std::nth_element(prod.begin(), prod.begin() + prod.size() / 2, prod.end());
    fit.plateau = prod[prod.size() / 2];
  }
  return fit;
}

/// N'(t) = #{j : s_j >= 1/t}; valid only below the truncation ceiling t = R^2.
inline long counting_function(const SingularValueSeries& series, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("counting_function: t must be positive");
  const double ceiling =
      series.truncation_R > 0.0 ? series.truncation_R * series.truncation_R
                                : std::numeric_limits<double>::infinity();
  if (t > ceiling)
    throw std::domain_error("counting_function: t above the truncation validity ceiling R^2");
  const double thresh = 1.0 / t;
  long cnt = 0;
  for (double s : series.values) {
    if (s >= thresh)
      ++cnt;
    else
      break;  // descending
  }
  return cnt;
}

struct WeylCountTable {
  std::vector<double> t;
  std::vector<long> count;
  double c_A = 0.0;  // vol(Omega) * omega_n / (2 pi)^n
};

/// Dirichlet eigenvalue counting on the slab: lambda_{xi,k} = |xi|^2 + msq + (k pi/ell)^2.
inline WeylCountTable dirichlet_weyl(double R, int kMax, const Geometry& geom,
                                     const ModelOperator& op, const std::vector<double>& ts) {
  if (geom.domain != Domain::Slab)
    throw std::invalid_argument("dirichlet_weyl: slab geometry required");
  geom.validate();
  op.validate();
  const double cover = op.msq + std::min(R * R, std::pow(kMax * pi() / geom.ell, 2));
  for (double t : ts)
    if (t > cover)
      throw std::domain_error("dirichlet_weyl: t exceeds the enumeration validity ceiling");
  std::vector<double> lams;
  for (const Mode& m : lattice_modes(geom, op, R))
    for (int k = 1; k <= kMax; ++k) {
      const double w = k * pi() / geom.ell;
      lams.push_back(m.a + w * w);
    }
  std::sort(lams.begin(), lams.end());
  WeylCountTable out;
  out.t = ts;
  for (double t : ts)
    out.count.push_back(
        static_cast<long>(std::upper_bound(lams.begin(), lams.end(), t) - lams.begin()));
  const int n = geom.n;
  const double omega_n = std::pow(pi(), n / 2.0) / std::tgamma(n / 2.0 + 1.0);
  const double vol = std::pow(2.0 * pi(), n - 1) * geom.ell;
  out.c_A = vol * omega_n / std::pow(2.0 * pi(), n);
  return out;
}

/// Partial Schatten sum sum_j s_j^p in series (descending) order.
inline double schatten_partial(const SingularValueSeries& series, double p) {
  double s = 0.0;
  for (double v : series.values)
    if (v > 0.0) s += std::pow(v, p);
  return s;
}

}  // namespace lab
