#ifndef REDMIX_NOISE_HPP_
#define REDMIX_NOISE_HPP_

/*
 * Bounded red noise built from random Haar series.
 *
 * A scalar path on one unit segment is
 *
 *   eta(t) = sum_{k=0}^{K} c_k sum_l xi_{k,l} h_{k,l}(t),   0 <= t < 1,
 *
 * where h_{0,0} is the indicator of [0,1) and, for k >= 1, h_{k,l} is the
 * unit-norm dipole on [l 2^-k, (l+1) 2^-k): +2^{k/2} on the left half and
 * -2^{k/2} on the right half. The draws xi are i.i.d. with a bounded density
 * on [-1, 1] and the coefficients obey |c_n| <= C n^-q 2^-n/2, q > 1.
 *
 * A vector force on H_M attaches two such paths (real and imaginary channel)
 * to every forced Fourier mode.
 */

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "redmix/errors.hpp"
#include "redmix/rng.hpp"

namespace redmix {

// ---------------------------------------------------------------------------
// Haar functions
// ---------------------------------------------------------------------------

struct HaarIndex {
  int level = 0;
  int position = 0;

  friend bool operator==(const HaarIndex &, const HaarIndex &) = default;
};

/// True when the function is supported inside [0, 1].
inline bool is_unit_supported(HaarIndex idx) {
  if (idx.level == 0)
    return idx.position == 0;
  return idx.level > 0 && idx.level < 31 && idx.position >= 0 &&
         idx.position < (1 << idx.level);
}

/// Number of Haar functions with level <= max_level supported in [0, 1].
inline int haar_count(int max_level) { return (2 << max_level) - 1; }

/// Position of idx in level-major order: (0,0), (1,0), (1,1), (2,0), ...
inline int haar_flat_index(HaarIndex idx) {
  return idx.level == 0 ? 0 : (1 << idx.level) - 1 + idx.position;
}

inline HaarIndex haar_from_flat(int flat) {
  if (flat == 0)
    return {0, 0};
  int level = 0;
  while ((2 << level) - 1 <= flat)
    ++level;
  return {level, flat - ((1 << level) - 1)};
}

inline double haar_eval(HaarIndex idx, double t) {
  if (!is_unit_supported(idx))
    throw std::invalid_argument("haar_eval: index outside the unit segment");
  if (!(t >= 0.0 && t < 1.0))
    throw std::invalid_argument("haar_eval: t must lie in [0, 1)");
  if (idx.level == 0)
    return 1.0;
  const double scaled = std::ldexp(t, idx.level) - idx.position;
  if (scaled < 0.0 || scaled >= 1.0)
    return 0.0;
  const double height = std::pow(2.0, 0.5 * idx.level);
  return scaled < 0.5 ? height : -height;
}

/// Exact integral of h_idx over [a, b] with 0 <= a <= b <= 1.
inline double haar_integral(HaarIndex idx, double a, double b) {
  if (idx.level == 0)
    return b - a;
  const double width = std::ldexp(1.0, -idx.level);
  const double left = idx.position * width;
  const double mid = left + 0.5 * width;
  const double right = left + width;
  const auto overlap = [&](double lo, double hi) {
    return std::max(0.0, std::min(b, hi) - std::max(a, lo));
  };
  const double height = std::pow(2.0, 0.5 * idx.level);
  return height * (overlap(left, mid) - overlap(mid, right));
}

// ---------------------------------------------------------------------------
// Draw density
// ---------------------------------------------------------------------------

enum class DensityKind { uniform, triangular };

/// Law of the draws xi: a Lipschitz density on [-1, 1] with p(0) != 0.
class NoiseDensity {
 public:
  NoiseDensity() = default;
  explicit NoiseDensity(DensityKind kind) : kind_(kind) {}

  static NoiseDensity from_name(std::string_view name) {
    if (name == "uniform")
      return NoiseDensity(DensityKind::uniform);
    if (name == "triangular")
      return NoiseDensity(DensityKind::triangular);
    throw ConfigError("unknown noise density '" + std::string(name) + "'");
  }

  DensityKind kind() const { return kind_; }

  std::string_view name() const {
    return kind_ == DensityKind::uniform ? "uniform" : "triangular";
  }

  double pdf(double x) const {
    if (x < -1.0 || x > 1.0)
      return 0.0;
    return kind_ == DensityKind::uniform ? 0.5 : 1.0 - std::abs(x);
  }

  double cdf(double x) const {
    if (x <= -1.0)
      return 0.0;
    if (x >= 1.0)
      return 1.0;
    if (kind_ == DensityKind::uniform)
      return 0.5 * (x + 1.0);
    return x < 0.0 ? 0.5 * (1.0 + x) * (1.0 + x)
                   : 1.0 - 0.5 * (1.0 - x) * (1.0 - x);
  }

  double variance() const {
    return kind_ == DensityKind::uniform ? 1.0 / 3.0 : 1.0 / 6.0;
  }

  /// Uniform on [0, 1) from the top 53 bits of one 64-bit draw.
  template <class Generator> static double unit(Generator &rng) {
    static_assert(Generator::max() - Generator::min() == ~std::uint64_t{0},
                  "needs a full 64-bit generator");
    return static_cast<double>((rng() - Generator::min()) >> 11) * 0x1.0p-53;
  }

  template <class Generator> double sample(Generator &rng) const {
    if (kind_ == DensityKind::uniform)
      return 2.0 * unit(rng) - 1.0;
    const double u = unit(rng);
    return u < 0.5 ? -1.0 + std::sqrt(2.0 * u)
                   : 1.0 - std::sqrt(2.0 * (1.0 - u));
  }

  /// Checks the density conditions numerically (support, p(0), mass).
  void validate() const {
    if (pdf(0.0) == 0.0)
      throw ConfigError("noise density must satisfy p(0) != 0");
    constexpr int cells = 1 << 14;
    double mass = 0.0;
    for (int i = 0; i < cells; ++i)
      mass += pdf(-1.0 + (i + 0.5) * 2.0 / cells) * 2.0 / cells;
    if (std::abs(mass - 1.0) > 1e-6)
      throw ConfigError("noise density does not integrate to one");
  }

 private:
  DensityKind kind_ = DensityKind::uniform;
};

// ---------------------------------------------------------------------------
// Red-noise law and scalar paths
// ---------------------------------------------------------------------------

/// Coefficients c_0..c_K together with the decay law they must satisfy.
struct RedNoiseLaw {
  int max_level = 6;
  std::vector<double> coefficients;
  double decay_constant = 1.0; // C in |c_n| <= C n^-q 2^-n/2
  double decay_exponent = 2.0; // q > 1
  NoiseDensity density;

  /// c_0 = c0 and c_n = c0 n^-q 2^-n/2, which saturates the decay law.
  static RedNoiseLaw saturated(int max_level, double c0, double q,
                               NoiseDensity density = {}) {
    RedNoiseLaw law;
    law.max_level = max_level;
    law.decay_constant = std::abs(c0);
    law.decay_exponent = q;
    law.density = density;
    if (max_level < 0 || max_level > 24)
      throw ConfigError("noise.K must lie in [0, 24]");
    law.coefficients.resize(static_cast<std::size_t>(max_level) + 1);
    law.coefficients[0] = c0;
    for (int n = 1; n <= max_level; ++n)
      law.coefficients[static_cast<std::size_t>(n)] =
          c0 * std::pow(n, -q) * std::pow(2.0, -0.5 * n);
    return law;
  }

  void validate() const {
    if (max_level < 0 || max_level > 24)
      throw ConfigError("noise.K must lie in [0, 24]");
    if (coefficients.size() != static_cast<std::size_t>(max_level) + 1)
      throw ConfigError("need exactly K+1 Haar coefficients");
    if (!(decay_exponent > 1.0))
      throw ConfigError("decay exponent q must exceed 1");
    if (!std::isfinite(decay_constant) || decay_constant <= 0.0)
      throw ConfigError("decay constant must be positive");
    if (!std::isfinite(coefficients[0]) || coefficients[0] == 0.0)
      throw ConfigError("c_0 must be nonzero");
    for (int n = 1; n <= max_level; ++n) {
      const double c = coefficients[static_cast<std::size_t>(n)];
      const double bound =
          decay_constant * std::pow(n, -decay_exponent) * std::pow(2.0, -0.5 * n);
      if (!std::isfinite(c) || std::abs(c) > bound * (1.0 + 1e-12))
        throw ConfigError("coefficient c_" + std::to_string(n) +
                          " violates the red-noise decay law");
    }
    density.validate();
  }

  /// sup_t |eta(t)| <= sum_k |c_k| 2^{k/2} for draws bounded by one.
  double sup_bound() const {
    double s = 0.0;
    for (int k = 0; k <= max_level; ++k)
      s += std::abs(coefficients[static_cast<std::size_t>(k)]) *
           std::pow(2.0, 0.5 * k);
    return s;
  }

  /// Bound on what the levels k > K would add to sup|eta| under the decay law.
  double truncation_bound() const {
    // sum_{k>K} C k^-q, tail beyond 10^5 terms by the integral bound.
    double s = 0.0;
    constexpr int last = 100000;
    for (int k = max_level + 1; k <= last; ++k)
      s += std::pow(k, -decay_exponent);
    s += std::pow(last, 1.0 - decay_exponent) / (decay_exponent - 1.0);
    return decay_constant * s;
  }
};

/// One scalar red-noise realisation on a unit segment J_{segment+1}.
struct HaarNoisePath {
  int max_level = 0;
  std::vector<double> coefficients; // c_0..c_K
  std::vector<double> draws;        // xi in level-major order, haar_count(K)
  std::int64_t segment = 0;

  double draw(HaarIndex idx) const {
    return draws[static_cast<std::size_t>(haar_flat_index(idx))];
  }
  double &draw(HaarIndex idx) {
    return draws[static_cast<std::size_t>(haar_flat_index(idx))];
  }
};

template <class Generator>
void sample_path_into(HaarNoisePath &path, const RedNoiseLaw &law,
                      Generator &rng, std::int64_t segment = 0) {
  path.max_level = law.max_level;
  path.coefficients = law.coefficients;
  path.segment = segment;
  path.draws.resize(static_cast<std::size_t>(haar_count(law.max_level)));
  for (double &xi : path.draws)
    xi = law.density.sample(rng);
}

/// Draws a path with i.i.d. xi from the law's density. Validates the law.
template <class Generator>
HaarNoisePath sample_path(const RedNoiseLaw &law, Generator &rng,
                          std::int64_t segment = 0) {
  law.validate();
  HaarNoisePath path;
  sample_path_into(path, law, rng, segment);
  return path;
}

inline double eval_path(const HaarNoisePath &path, double t) {
  if (!(t >= 0.0 && t < 1.0))
    throw std::invalid_argument("eval_path: t must lie in [0, 1)");
  double value = path.coefficients[0] * path.draws[0];
  for (int k = 1; k <= path.max_level; ++k) {
    const double scaled = std::ldexp(t, k);
    const int l = static_cast<int>(scaled);
    const double height = std::pow(2.0, 0.5 * k);
    const double h = (scaled - l) < 0.5 ? height : -height;
    value += path.coefficients[static_cast<std::size_t>(k)] *
             path.draws[static_cast<std::size_t>((1 << k) - 1 + l)] * h;
  }
  return value;
}

/// Exact integral of the path over [a, b] inside the unit segment.
inline double integrate_path(const HaarNoisePath &path, double a, double b) {
  if (!(0.0 <= a && a <= b && b <= 1.0))
    throw std::invalid_argument("integrate_path: need 0 <= a <= b <= 1");
  double total = path.coefficients[0] * path.draws[0] * (b - a);
  if (a == 0.0 && b == 1.0)
    return total; // every dipole has zero mean
  // Dipoles lying wholly inside or outside [a, b] integrate to zero, so per
  // level only the (at most two) cells holding an endpoint contribute.
  for (int k = 1; k <= path.max_level; ++k) {
    const int last = (1 << k) - 1;
    const int la = std::min(last, static_cast<int>(std::ldexp(a, k)));
    const int lb = std::min(last, static_cast<int>(std::ldexp(b, k)));
    const double ck = path.coefficients[static_cast<std::size_t>(k)];
    for (int l : {la, lb}) {
      total += ck * path.draws[static_cast<std::size_t>(last + l)] *
               haar_integral({k, l}, a, b);
      if (la == lb)
        break;
    }
  }
  return total;
}

/// Width of the cells on which a level-K path is constant.
inline double path_cell_width(int max_level) {
  return std::ldexp(1.0, -(max_level + 1));
}

// ---------------------------------------------------------------------------
// Vector force on H_M
// ---------------------------------------------------------------------------

enum class Channel : int { real = 0, imag = 1 };

/// Which modes are forced, with what amplitude, under which scalar law.
struct ForceLayout {
  std::vector<int> modes;         // wavenumbers j in M
  std::vector<double> amplitudes; // a_j
  RedNoiseLaw law;

  void validate() const {
    if (modes.size() != amplitudes.size())
      throw ConfigError("force.modes and force.amplitudes differ in length");
    for (std::size_t i = 0; i < modes.size(); ++i) {
      if (!std::isfinite(amplitudes[i]))
        throw ConfigError("force amplitudes must be finite");
      for (std::size_t j = 0; j < i; ++j)
        if (modes[i] == modes[j])
          throw ConfigError("duplicate forced mode " + std::to_string(modes[i]));
    }
    law.validate();
  }

  double amplitude_l2() const {
    double s = 0.0;
    for (double a : amplitudes)
      s += a * a;
    return std::sqrt(s);
  }
};

/// One element of E = L2(0,1; H_M): two scalar paths per forced mode.
struct ForceProfile {
  std::vector<int> modes;
  std::vector<double> amplitudes;
  std::vector<std::array<HaarNoisePath, 2>> paths;

  std::size_t size() const { return modes.size(); }

  const HaarNoisePath &path(std::size_t mode, Channel ch) const {
    return paths[mode][static_cast<std::size_t>(ch)];
  }
  HaarNoisePath &path(std::size_t mode, Channel ch) {
    return paths[mode][static_cast<std::size_t>(ch)];
  }

  int max_level() const { return paths.empty() ? 0 : paths[0][0].max_level; }
};

template <class Generator>
ForceProfile sample_force(const ForceLayout &layout, Generator &rng,
                          std::int64_t segment = 0) {
  ForceProfile f;
  f.modes = layout.modes;
  f.amplitudes = layout.amplitudes;
  f.paths.resize(layout.modes.size());
  for (auto &pair : f.paths)
    for (auto &p : pair)
      sample_path_into(p, layout.law, rng, segment);
  return f;
}

/// Force driving segment `segment` of trajectory `trajectory`.
inline ForceProfile sample_force(const ForceLayout &layout, std::uint64_t seed,
                                 std::uint64_t trajectory, std::uint64_t segment,
                                 StreamTag tag = StreamTag::drive) {
  Rng rng = make_stream(seed, trajectory, segment, tag);
  return sample_force(layout, rng, static_cast<std::int64_t>(segment));
}

/// Force with all draws zero (the shape of `layout`, no randomness).
inline ForceProfile zero_force(const ForceLayout &layout) {
  ForceProfile f;
  f.modes = layout.modes;
  f.amplitudes = layout.amplitudes;
  f.paths.resize(layout.modes.size());
  for (auto &pair : f.paths)
    for (auto &p : pair) {
      p.max_level = layout.law.max_level;
      p.coefficients = layout.law.coefficients;
      p.draws.assign(static_cast<std::size_t>(haar_count(p.max_level)), 0.0);
    }
  return f;
}

/// Complex value a_j (eta_re + i eta_im)(t) of forced entry `mode`.
inline std::complex<double> eval_force_mode(const ForceProfile &force,
                                            std::size_t mode, double t) {
  return force.amplitudes[mode] *
         std::complex<double>(eval_path(force.path(mode, Channel::real), t),
                              eval_path(force.path(mode, Channel::imag), t));
}

/// a * x + y on the draws; shapes must agree.
inline ForceProfile axpy(double a, const ForceProfile &x, const ForceProfile &y) {
  if (x.modes != y.modes || x.max_level() != y.max_level())
    throw std::invalid_argument("axpy: force shapes differ");
  ForceProfile out = y;
  for (std::size_t m = 0; m < x.size(); ++m)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < out.paths[m][c].draws.size(); ++i)
        out.paths[m][c].draws[i] += a * x.paths[m][c].draws[i];
  return out;
}

// ---------------------------------------------------------------------------
// Embedding of E into coefficient space
// ---------------------------------------------------------------------------

/*
 * Coordinates are the draws xi, ordered (mode, channel, Haar flat index) and
 * truncated to levels <= k_ctl. Coordinate i moves the force along the unit
 * direction a_j c_k h_{k,l} e_j (times i on the imaginary channel), so the E
 * inner product is the Euclidean one weighted by (a_j c_k)^2.
 */
inline int embedding_dim(std::size_t forced_modes, int k_ctl) {
  return static_cast<int>(forced_modes) * 2 * haar_count(k_ctl);
}

struct EmbeddingSlot {
  std::size_t mode;
  Channel channel;
  HaarIndex haar;
};

inline EmbeddingSlot embedding_slot(int index, int k_ctl) {
  const int per_channel = haar_count(k_ctl);
  const int block = index / per_channel;
  return {static_cast<std::size_t>(block / 2),
          block % 2 == 0 ? Channel::real : Channel::imag,
          haar_from_flat(index % per_channel)};
}

inline void check_truncation(const ForceProfile &force, int k_ctl) {
  if (k_ctl < 0 || k_ctl > force.max_level())
    throw std::invalid_argument("E truncation level exceeds the noise level K");
}

inline Eigen::VectorXd embed_in_E(const ForceProfile &force, int k_ctl) {
  check_truncation(force, k_ctl);
  const int per_channel = haar_count(k_ctl);
  Eigen::VectorXd out(embedding_dim(force.size(), k_ctl));
  int i = 0;
  for (std::size_t m = 0; m < force.size(); ++m)
    for (std::size_t c = 0; c < 2; ++c)
      for (int h = 0; h < per_channel; ++h)
        out[i++] = force.paths[m][c].draws[static_cast<std::size_t>(h)];
  return out;
}

/// Replaces the truncated draws of `base` by `coeffs`; inverse of embed_in_E.
inline ForceProfile extract_from_E(const ForceProfile &base,
                                   const Eigen::VectorXd &coeffs, int k_ctl) {
  check_truncation(base, k_ctl);
  if (coeffs.size() != embedding_dim(base.size(), k_ctl))
    throw std::invalid_argument("extract_from_E: coefficient vector size");
  const int per_channel = haar_count(k_ctl);
  ForceProfile out = base;
  int i = 0;
  for (std::size_t m = 0; m < out.size(); ++m)
    for (std::size_t c = 0; c < 2; ++c)
      for (int h = 0; h < per_channel; ++h)
        out.paths[m][c].draws[static_cast<std::size_t>(h)] = coeffs[i++];
  return out;
}

inline Eigen::VectorXd embedding_weights(const ForceProfile &force, int k_ctl) {
  check_truncation(force, k_ctl);
  Eigen::VectorXd w(embedding_dim(force.size(), k_ctl));
  for (int i = 0; i < w.size(); ++i) {
    const EmbeddingSlot s = embedding_slot(i, k_ctl);
    const double scale = force.amplitudes[s.mode] *
                         force.path(s.mode, s.channel)
                             .coefficients[static_cast<std::size_t>(s.haar.level)];
    w[i] = scale * scale;
  }
  return w;
}

/// L2(0,1; H_M) norm of the truncated part of `force`.
inline double e_norm(const ForceProfile &force, int k_ctl) {
  const Eigen::VectorXd x = embed_in_E(force, k_ctl);
  return std::sqrt(x.cwiseProduct(x).dot(embedding_weights(force, k_ctl)));
}

// ---------------------------------------------------------------------------
// Large-scale behaviour
// ---------------------------------------------------------------------------

/*
 * beta_N(T) = N^{-1/2} int_0^{NT} eta(t) dt for a scalar noise given as
 * consecutive unit-segment paths.
 */
inline double donsker_process(std::span<const HaarNoisePath> segments, int n,
                              double horizon) {
  if (n <= 0)
    throw std::invalid_argument("donsker_process: N must be positive");
  if (!(horizon >= 0.0))
    throw std::invalid_argument("donsker_process: T must be nonnegative");
  const double end = n * horizon;
  const auto full = static_cast<std::size_t>(std::floor(end));
  const double frac = end - static_cast<double>(full);
  const std::size_t needed = full + (frac > 0.0 ? 1 : 0);
  if (segments.size() < needed)
    throw std::invalid_argument("donsker_process: not enough noise segments");
  double integral = 0.0;
  for (std::size_t s = 0; s < full; ++s)
    integral += integrate_path(segments[s], 0.0, 1.0);
  if (frac > 0.0)
    integral += integrate_path(segments[full], 0.0, frac);
  return integral / std::sqrt(static_cast<double>(n));
}

} // namespace redmix

#endif // REDMIX_NOISE_HPP_
