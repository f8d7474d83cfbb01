#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lab {

using cplx = std::complex<double>;

/// Flat model domains: slab T^{n-1} x (0, ell) and half-cylinder T^{n-1} x (0, inf),
/// cross-section periods fixed at 2*pi. The boundary of interest is x_n = 0; the far
/// face of the slab always carries a homogeneous Dirichlet condition.
enum class Domain { Slab, HalfCylinder };

struct Geometry {
  Domain domain = Domain::Slab;
  int n = 2;          // ambient dimension, n >= 2
  double ell = 1.0;   // slab thickness; ignored for the half-cylinder

  void validate() const {
    if (n < 2) throw std::invalid_argument("Geometry: dimension n must be >= 2");
    if (domain == Domain::Slab && !(ell > 0.0))
      throw std::invalid_argument("Geometry: slab thickness ell must be positive");
  }
};

/// A = -Laplace + msq with msq > 0, so that 0 lies below the Dirichlet spectrum.
struct ModelOperator {
  double msq = 1.0;

  void validate() const {
    if (!(msq > 0.0)) throw std::invalid_argument("ModelOperator: msq must be positive");
  }
};

/// One boundary Fourier mode xi in Z^{n-1} together with its derived quantities.
struct Mode {
  std::vector<int> xi;
  double a = 0.0;     // |xi|^2 + msq

  int dim() const { return static_cast<int>(xi.size()); }

  double xi_normsq() const {
    double s = 0.0;
    for (int c : xi) s += double(c) * double(c);
    return s;
  }
  double xi_norm() const { return std::sqrt(xi_normsq()); }

  /// Japanese bracket <xi> = (1 + |xi|^2)^{1/2}.
  double angle_bracket() const { return std::sqrt(1.0 + xi_normsq()); }

  /// kappa(lambda) = sqrt(a - lambda), principal branch, Re kappa >= 0.
  cplx kappa(cplx lambda) const { return std::sqrt(cplx(a, 0.0) - lambda); }

  /// Real kappa for lambda real below the fiber branch point.
  double kappa_real(double lambda) const {
    if (!(lambda < a)) throw std::domain_error("Mode: kappa_real requires lambda < a");
    return std::sqrt(a - lambda);
  }

  bool operator==(const Mode& o) const { return xi == o.xi; }
  bool operator<(const Mode& o) const { return xi < o.xi; }

  std::string label() const {
    std::string s = "(";
    for (std::size_t i = 0; i < xi.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(xi[i]);
    }
    return s + ")";
  }
};

inline Mode make_mode(std::vector<int> xi, const ModelOperator& op) {
  Mode m;
  m.xi = std::move(xi);
  m.a = m.xi_normsq() + op.msq;
  return m;
}

/// All lattice points xi in Z^{n-1} with |xi| <= R, in lexicographic order.
/// Each lattice point is one mode; multiplicity is never binned by |xi|.
inline std::vector<Mode> lattice_modes(const Geometry& geom, const ModelOperator& op, double R) {
  geom.validate();
  op.validate();
  if (!(R >= 0.0)) throw std::invalid_argument("lattice_modes: R must be >= 0");
  const int d = geom.n - 1;
  const int rmax = static_cast<int>(std::floor(R));
  std::vector<Mode> out;
  std::vector<int> cur(d, 0);
  const double R2 = R * R;
  // depth-first enumeration in lexicographic order
  auto rec = [&](auto&& self, int pos, double partial) -> void {
    if (pos == d) {
      if (partial <= R2) out.push_back(make_mode(cur, op));
      return;
    }
    for (int c = -rmax; c <= rmax; ++c) {
      double p = partial + double(c) * double(c);
      if (p > R2) continue;
      cur[pos] = c;
      self(self, pos + 1, p);
    }
  };
  rec(rec, 0, 0.0);
  return out;
}

}  // namespace lab
