#ifndef REDMIX_CGL_HPP_
#define REDMIX_CGL_HPP_

// Complex Ginzburg-Landau operators on the 1-D torus:
//
//   u_t + L u + B(u) = eta,   L = eps(-Delta + m0),
//   B(u) = -i gamma Delta u + i |u|^{2p} u.

#include <cmath>
#include <string>

#include "redmix/errors.hpp"
#include "redmix/spectral.hpp"

namespace redmix {

struct CglParams {
  double epsilon = 0.1;    // dissipation
  double gamma = 1.0;      // dispersion
  int p = 1;               // nonlinearity |u|^{2p} u
  double mass_shift = 1.0; // m0, damps the zero mode
  int n_modes = 64;
  int dt_log2 = 9;         // dt = 2^-dt_log2
  bool nonlinear = true;   // false switches B off entirely (test hook)

  int steps_per_unit() const { return 1 << dt_log2; }
  double dt() const { return std::ldexp(1.0, -dt_log2); }

  /// Physical grid size that makes the degree 2p+1 product alias free.
  int padded_size() const { return (p + 1) * n_modes; }

  /// Eigenvalue of L on e^{ikx}.
  double lambda(int k) const { return epsilon * (double(k) * k + mass_shift); }

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw ConfigError("cgl.epsilon must be positive");
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
      throw ConfigError("cgl.gamma must be nonnegative");
    if (p < 1 || p > 8)
      throw ConfigError("cgl.p must be an integer in [1, 8]");
    if (!(mass_shift >= 0.0) || !std::isfinite(mass_shift))
      throw ConfigError("cgl.mass_shift must be nonnegative");
    if (n_modes < 4 || n_modes % 2 != 0 || n_modes > (1 << 16))
      throw ConfigError("grid.n_modes must be even and in [4, 65536]");
    if (dt_log2 < 0 || dt_log2 > 20)
      throw ConfigError("grid.dt_log2 must lie in [0, 20]");
  }
};

inline SpectralState apply_L(const SpectralState &u, const CglParams &params) {
  SpectralState out = u;
  for (int i = 0; i < u.n_modes(); ++i)
    out.coefficients()[i] *=
        params.lambda(SpectralState::wavenumber_at(i, u.n_modes()));
  return out;
}

namespace detail {

inline double int_pow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i)
    r *= x;
  return r;
}

/// P_N(i |u|^{2p} u) from spectral u, on the dealiased grid.
inline void polynomial_term(const Eigen::VectorXcd &u, int p, PaddedTransform &tr,
                            Eigen::VectorXcd &phys, Eigen::VectorXcd &out,
                            Eigen::VectorXcd *keep_phys = nullptr) {
  tr.to_physical(u, phys);
  if (keep_phys)
    *keep_phys = phys;
  for (Eigen::Index j = 0; j < phys.size(); ++j) {
    const Complex w = phys[j];
    phys[j] = Complex(0.0, int_pow(std::norm(w), p)) * w;
  }
  tr.to_spectral(phys, out);
}

/*
 * P_N of the Gateaux derivative of i|u|^{2p}u at u (given on the padded
 * grid) in direction v:  i[(p+1)|u|^{2p} v + p |u|^{2p-2} u^2 conj(v)].
 */
inline void polynomial_derivative(const Eigen::VectorXcd &u_phys,
                                  const Eigen::VectorXcd &v, int p,
                                  PaddedTransform &tr, Eigen::VectorXcd &phys,
                                  Eigen::VectorXcd &out) {
  tr.to_physical(v, phys);
  for (Eigen::Index j = 0; j < phys.size(); ++j) {
    const Complex w = u_phys[j];
    const double m = std::norm(w);
    const double mp1 = int_pow(m, p - 1);
    const Complex d = (p + 1) * mp1 * m * phys[j] + p * mp1 * w * w * std::conj(phys[j]);
    phys[j] = Complex(0.0, 1.0) * d;
  }
  tr.to_spectral(phys, out);
}

} // namespace detail

/// B(u): dispersive part i gamma k^2 u_k plus the dealiased i|u|^{2p}u.
inline SpectralState nonlinearity(const SpectralState &u, const CglParams &params) {
  SpectralState out(u.n_modes());
  if (!params.nonlinear)
    return out;
  PaddedTransform tr(u.n_modes(), (params.p + 1) * u.n_modes());
  Eigen::VectorXcd phys;
  detail::polynomial_term(u.coefficients(), params.p, tr, phys, out.coefficients());
  for (int i = 0; i < u.n_modes(); ++i) {
    const double k = SpectralState::wavenumber_at(i, u.n_modes());
    out.coefficients()[i] += Complex(0.0, params.gamma * k * k) * u.coefficients()[i];
  }
  if (!out.all_finite())
    throw NumericalError("nonlinearity overflowed");
  return out;
}

} // namespace redmix

#endif // REDMIX_CGL_HPP_
