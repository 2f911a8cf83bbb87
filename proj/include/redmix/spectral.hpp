#ifndef REDMIX_SPECTRAL_HPP_
#define REDMIX_SPECTRAL_HPP_

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace redmix {

using Complex = std::complex<double>;

/*
 * Truncated Fourier representation u(x) = sum_k u_k e^{ikx} on the 1-D
 * torus, wavenumbers k in {-N/2+1, ..., N/2}. Coefficients are stored in FFT
 * order: slot i holds k = i for i <= N/2 and k = i - N otherwise.
 */
class SpectralState {
 public:
  SpectralState() = default;
  explicit SpectralState(int n_modes) : coeffs_(Eigen::VectorXcd::Zero(n_modes)) {
    if (n_modes < 2 || n_modes % 2 != 0)
      throw std::invalid_argument("SpectralState: n_modes must be even and >= 2");
  }
  explicit SpectralState(Eigen::VectorXcd coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.size() < 2 || coeffs_.size() % 2 != 0)
      throw std::invalid_argument("SpectralState: n_modes must be even and >= 2");
  }

  int n_modes() const { return static_cast<int>(coeffs_.size()); }

  static int slot_of(int k, int n_modes) {
    if (k <= -n_modes / 2 || k > n_modes / 2)
      throw std::out_of_range("wavenumber outside the resolved band");
    return k >= 0 ? k : k + n_modes;
  }
  static int wavenumber_at(int slot, int n_modes) {
    return slot <= n_modes / 2 ? slot : slot - n_modes;
  }

  Complex &operator[](int k) { return coeffs_[slot_of(k, n_modes())]; }
  const Complex &operator[](int k) const { return coeffs_[slot_of(k, n_modes())]; }

  Eigen::VectorXcd &coefficients() { return coeffs_; }
  const Eigen::VectorXcd &coefficients() const { return coeffs_; }

  bool all_finite() const { return coeffs_.allFinite(); }

  SpectralState &operator+=(const SpectralState &o) {
    coeffs_ += o.coeffs_;
    return *this;
  }
  SpectralState &operator-=(const SpectralState &o) {
    coeffs_ -= o.coeffs_;
    return *this;
  }
  SpectralState &operator*=(Complex s) {
    coeffs_ *= s;
    return *this;
  }

  friend SpectralState operator+(SpectralState a, const SpectralState &b) { return a += b; }
  friend SpectralState operator-(SpectralState a, const SpectralState &b) { return a -= b; }
  friend SpectralState operator*(Complex s, SpectralState a) { return a *= s; }
  friend bool operator==(const SpectralState &a, const SpectralState &b) {
    return a.coeffs_.size() == b.coeffs_.size() && a.coeffs_ == b.coeffs_;
  }

 private:
  Eigen::VectorXcd coeffs_;
};

/// L2 norm of the coefficient vector (the norm of H).
inline double norm_H(const SpectralState &u) { return u.coefficients().norm(); }

inline double dist_H(const SpectralState &u, const SpectralState &v) {
  if (u.n_modes() != v.n_modes())
    throw std::invalid_argument("dist_H: state sizes differ");
  return (u.coefficients() - v.coefficients()).norm();
}

/// (sum k^2 |u_k|^2)^{1/2}, the H^1 seminorm, monitored as a smoothness proxy.
inline double h1_seminorm(const SpectralState &u) {
  double s = 0.0;
  for (int i = 0; i < u.n_modes(); ++i) {
    const double k = SpectralState::wavenumber_at(i, u.n_modes());
    s += k * k * std::norm(u.coefficients()[i]);
  }
  return std::sqrt(s);
}

/*
 * Transforms between N spectral coefficients and M >= N physical grid
 * values (zero padding / truncation). Holds FFT plans and scratch, so one
 * instance per thread.
 */
class PaddedTransform {
 public:
  PaddedTransform(int n_modes, int grid_size)
      : n_(n_modes), m_(grid_size), spec_(grid_size), phys_(grid_size) {
    if (grid_size < n_modes)
      throw std::invalid_argument("PaddedTransform: grid smaller than band");
    fft_.SetFlag(Eigen::FFT<double>::Unscaled);
  }

  int n_modes() const { return n_; }
  int grid_size() const { return m_; }

  /// u(x_j) = sum_k u_k e^{i k x_j}, x_j = 2 pi j / M.
  void to_physical(const Eigen::VectorXcd &coeffs, Eigen::VectorXcd &values) {
    std::fill(spec_.begin(), spec_.end(), Complex(0.0));
    for (int i = 0; i < n_; ++i) {
      const int k = SpectralState::wavenumber_at(i, n_);
      spec_[static_cast<std::size_t>(k >= 0 ? k : k + m_)] = coeffs[i];
    }
    fft_.inv(phys_, spec_);
    values.resize(m_);
    for (int j = 0; j < m_; ++j)
      values[j] = phys_[static_cast<std::size_t>(j)];
  }

  /// Fourier coefficients of grid values, truncated to the N-mode band.
  void to_spectral(const Eigen::VectorXcd &values, Eigen::VectorXcd &coeffs) {
    for (int j = 0; j < m_; ++j)
      phys_[static_cast<std::size_t>(j)] = values[j];
    fft_.fwd(spec_, phys_);
    coeffs.resize(n_);
    const double scale = 1.0 / m_;
    for (int i = 0; i < n_; ++i) {
      const int k = SpectralState::wavenumber_at(i, n_);
      coeffs[i] = scale * spec_[static_cast<std::size_t>(k >= 0 ? k : k + m_)];
    }
  }

 private:
  int n_;
  int m_;
  Eigen::FFT<double> fft_;
  std::vector<Complex> spec_;
  std::vector<Complex> phys_;
};

inline Eigen::VectorXcd to_physical(const SpectralState &u) {
  PaddedTransform t(u.n_modes(), u.n_modes());
  Eigen::VectorXcd values;
  t.to_physical(u.coefficients(), values);
  return values;
}

inline SpectralState from_physical(const Eigen::VectorXcd &values) {
  PaddedTransform t(static_cast<int>(values.size()), static_cast<int>(values.size()));
  Eigen::VectorXcd coeffs;
  t.to_spectral(values, coeffs);
  return SpectralState(std::move(coeffs));
}

} // namespace redmix

#endif // REDMIX_SPECTRAL_HPP_
