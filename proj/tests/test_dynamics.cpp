#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "redmix/cgl.hpp"
#include "redmix/diagnostics.hpp"
#include "redmix/linearized.hpp"
#include "redmix/shift_map.hpp"
#include "redmix/spectral.hpp"

using namespace redmix;

namespace {

SpectralState random_state(int n, double norm, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0, 0, StreamTag::initial);
  return norm * random_profile(n, rng);
}

// Complex Gaussian coefficients on every slot, no spectral decay.
SpectralState white_state(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  SpectralState u(n);
  for (int s = 0; s < n; ++s)
    u.coefficients()[s] = Complex(g(rng), g(rng));
  return u;
}

CglParams linear_params() {
  CglParams p;
  p.nonlinear = false;
  p.n_modes = 16;
  return p;
}

ForceLayout layout_for(std::vector<int> modes, int K = 6, double amp = 0.5) {
  return {modes, std::vector<double>(modes.size(), amp), RedNoiseLaw::saturated(K, 1.0, 2.0)};
}

ForceLayout default_layout() { return layout_for({-3, -2, -1, 0, 1, 2, 3}); }

// Exact Duhamel solution of u' = -lambda u + f(t) with f constant on each of
// the 2^(K+1) noise cells.
Complex duhamel(Complex u0, double lambda, const ForceProfile &f, std::size_t m) {
  const int cells = 2 << f.max_level();
  Complex u = std::exp(-lambda) * u0;
  for (int c = 0; c < cells; ++c) {
    const double ta = double(c) / cells, tb = double(c + 1) / cells;
    const Complex fc = eval_force_mode(f, m, (c + 0.5) / cells);
    u += fc * (std::exp(-lambda * (1.0 - tb)) - std::exp(-lambda * (1.0 - ta))) / lambda;
  }
  return u;
}

double rel_err(const SpectralState &a, const SpectralState &b) { return dist_H(a, b) / norm_H(b); }

} // namespace

TEST(Spectral, SlotsAndWavenumbers) {
  EXPECT_EQ(SpectralState::slot_of(0, 8), 0);
  EXPECT_EQ(SpectralState::slot_of(4, 8), 4);
  EXPECT_EQ(SpectralState::slot_of(-3, 8), 5);
  EXPECT_THROW(SpectralState::slot_of(-4, 8), std::out_of_range);
  EXPECT_THROW(SpectralState::slot_of(5, 8), std::out_of_range);
  for (int s = 0; s < 8; ++s)
    EXPECT_EQ(SpectralState::slot_of(SpectralState::wavenumber_at(s, 8), 8), s);
  EXPECT_THROW(SpectralState(3), std::invalid_argument);
}

TEST(Spectral, NormAndMetric) {
  SpectralState u(8);
  EXPECT_EQ(norm_H(u), 0.0);
  u[2] = Complex(3.0, 4.0);
  EXPECT_DOUBLE_EQ(norm_H(u), 5.0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const SpectralState a = white_state(8, 3 * s), b = white_state(8, 3 * s + 1),
                        c = white_state(8, 3 * s + 2);
    EXPECT_LE(dist_H(a, c), dist_H(a, b) + dist_H(b, c) + 1e-14);
    EXPECT_EQ(dist_H(a, b), dist_H(b, a));
    EXPECT_EQ(dist_H(a, a), 0.0);
  }
}

TEST(Spectral, PhysicalRoundTrip) {
  const SpectralState u = white_state(32, 9);
  const SpectralState back = from_physical(to_physical(u));
  EXPECT_LE(dist_H(back, u), 1e-12 * norm_H(u));
  SpectralState e1(16);
  e1[1] = 1.0;
  const Eigen::VectorXcd x = to_physical(e1);
  for (int j = 0; j < 16; ++j)
    EXPECT_NEAR(std::abs(x[j] - std::polar(1.0, 2.0 * M_PI * j / 16)), 0.0, 1e-14);
}

TEST(Cgl, ApplyL) {
  CglParams p;
  p.epsilon = 0.5;
  p.mass_shift = 1.0;
  p.n_modes = 8;
  SpectralState u(8);
  u[3] = 1.0;
  EXPECT_DOUBLE_EQ(apply_L(u, p)[3].real(), 5.0);
  EXPECT_EQ(norm_H(apply_L(SpectralState(8), p)), 0.0);
  p.epsilon = 1.0;
  p.mass_shift = 0.0;
  u = SpectralState(8);
  u[1] = 1.0;
  EXPECT_EQ(apply_L(u, p), u);
}

TEST(Cgl, NonlinearityOfPlaneWave) {
  CglParams p;
  p.gamma = 0.0;
  p.n_modes = 16;
  SpectralState u(16);
  u[1] = 1.0;
  const SpectralState b = nonlinearity(u, p);
  EXPECT_NEAR(std::abs(b[1] - Complex(0.0, 1.0)), 0.0, 1e-14);
  EXPECT_NEAR(norm_H(b - b[1] * u), 0.0, 1e-14);
  p.gamma = 1.0;
  EXPECT_NEAR(std::abs(nonlinearity(u, p)[1] - Complex(0.0, 2.0)), 0.0, 1e-14);
  EXPECT_EQ(norm_H(nonlinearity(SpectralState(16), p)), 0.0);
}

TEST(Cgl, ConstantStateRotates) {
  CglParams p;
  p.gamma = 0.0;
  p.p = 2;
  p.n_modes = 8;
  SpectralState u(8);
  u[0] = Complex(0.6, -0.8) * 1.5;
  const SpectralState b = nonlinearity(u, p);
  // i |c|^4 c
  EXPECT_NEAR(std::abs(b[0] - Complex(0.0, std::pow(1.5, 4)) * u[0]), 0.0, 1e-13);
  // orthogonal to u: no change of the norm
  EXPECT_NEAR(std::real(std::conj(u[0]) * b[0]), 0.0, 1e-13);
}

TEST(Cgl, CubicTermMatchesTripleConvolution) {
  CglParams p;
  p.gamma = 0.0;
  p.n_modes = 16;
  const SpectralState u = white_state(16, 4);
  SpectralState expect(16);
  for (int a = -7; a <= 8; ++a)
    for (int b = -7; b <= 8; ++b)
      for (int c = -7; c <= 8; ++c) {
        const int k = a - b + c;
        if (k > -8 && k <= 8)
          expect[k] += Complex(0.0, 1.0) * u[a] * std::conj(u[b]) * u[c];
      }
  EXPECT_LE(dist_H(nonlinearity(u, p), expect), 1e-12 * norm_H(expect));
}

TEST(Cgl, ParameterValidation) {
  CglParams p;
  p.epsilon = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = CglParams();
  p.n_modes = 7;
  EXPECT_THROW(p.validate(), ConfigError);
  p = CglParams();
  p.p = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  CglParams q;
  q.dt_log2 = 8;
  EXPECT_NO_THROW(check_forcing_resolved(7, q));
  EXPECT_THROW(check_forcing_resolved(8, q), ConfigError);
}

TEST(ShiftMap, LinearUnforcedDecayIsExact) {
  const CglParams p = linear_params();
  const ShiftMap map(p);
  const SpectralState u0 = white_state(16, 1);
  const SpectralState u1 = map.step(u0, zero_force(layout_for({0})));
  for (int k = -7; k <= 8; ++k)
    EXPECT_NEAR(std::abs(u1[k] - std::exp(-p.lambda(k)) * u0[k]), 0.0, 1e-13 * std::abs(u0[k]) + 1e-16);
}

TEST(ShiftMap, LinearConstantForceDuhamel) {
  const CglParams p = linear_params();
  const ShiftMap map(p);
  ForceLayout lay = layout_for({2}, 0, 1.0);
  ForceProfile f = zero_force(lay);
  f.path(0, Channel::real).draws[0] = 0.7;
  f.path(0, Channel::imag).draws[0] = -0.2;
  const Complex a(0.7, -0.2);
  const SpectralState u0 = white_state(16, 2);
  const SpectralState u1 = map.step(u0, f);
  const double lam = p.lambda(2);
  EXPECT_NEAR(std::abs(u1[2] - (std::exp(-lam) * u0[2] + a * (1.0 - std::exp(-lam)) / lam)), 0.0, 1e-14);
}

TEST(ShiftMap, ZeroEigenvalueUsesTheLimit) {
  CglParams p = linear_params();
  p.mass_shift = 0.0;
  const ShiftMap map(p);
  ForceProfile f = zero_force(layout_for({0}, 0, 1.0));
  f.path(0, Channel::real).draws[0] = 0.25;
  SpectralState u0(16);
  u0[0] = 1.0;
  EXPECT_NEAR(std::abs(map.step(u0, f)[0] - 1.25), 0.0, 1e-12);
}

TEST(ShiftMap, LinearRedNoiseDuhamelPerCell) {
  const CglParams p = linear_params();
  const ShiftMap map(p);
  const ForceLayout lay = layout_for({-2, 0, 1, 5}, 6, 0.8);
  const ForceProfile f = sample_force(lay, 3, 0, 0);
  const SpectralState u0 = white_state(16, 3);
  const SpectralState u1 = map.step(u0, f);
  for (std::size_t m = 0; m < lay.modes.size(); ++m) {
    const int k = lay.modes[m];
    EXPECT_NEAR(std::abs(u1[k] - duhamel(u0[k], p.lambda(k), f, m)), 0.0, 1e-12) << k;
  }
}

TEST(ShiftMap, SelfConvergence) {
  const ForceLayout lay = default_layout();
  const ForceProfile f = sample_force(lay, 5, 0, 0);
  const SpectralState u0 = random_state(64, 1.5, 5);
  auto run = [&](int dt_log2) {
    CglParams p;
    p.dt_log2 = dt_log2;
    return ShiftMap(p).step(u0, f);
  };
  const SpectralState ref = run(13);
  const double e8 = rel_err(run(8), ref);
  const double e9 = rel_err(run(9), ref);
  EXPECT_LE(e9, 1e-8);
  EXPECT_GE(e8 / e9, 3.5);
}

TEST(ShiftMap, ZeroForceNormNonIncreasing) {
  const ShiftMap map{CglParams()};
  const ForcingSchedule none = ForcingSchedule::Zero(64, CglParams().steps_per_unit());
  SpectralState u = random_state(64, 3.0, 6);
  double prev = norm_H(u);
  for (int t = 0; t < 10; ++t) {
    u = map.step(u, none);
    EXPECT_LE(norm_H(u), prev * (1.0 + 1e-12));
    prev = norm_H(u);
  }
}

TEST(ShiftMap, BlowUpReportsTime) {
  const ShiftMap map{CglParams()};
  try {
    map.step(random_state(64, 1e4, 7), zero_force(default_layout()));
    FAIL() << "expected a blow-up";
  } catch (const NumericalError &e) {
    EXPECT_GT(e.time(), 0.0);
    EXPECT_LE(e.time(), 1.0);
  }
}

TEST(ShiftMap, RejectsUnresolvedForcing) {
  CglParams p;
  p.dt_log2 = 6;
  const ShiftMap map(p);
  EXPECT_THROW(map.step(SpectralState(64), zero_force(default_layout())), ConfigError);
}

TEST(Tangent, ZeroSourceGivesZero) {
  const ShiftMap map{CglParams()};
  const ForceLayout lay = default_layout();
  const BaseTrajectory base = map.trajectory(random_state(64, 1.0, 8), sample_force(lay, 8, 0, 0));
  EXPECT_EQ(norm_H(map.tangent(base, zero_force(lay))), 0.0);
}

TEST(Tangent, LinearCaseIsDuhamelIntegral) {
  const CglParams p = linear_params();
  const ShiftMap map(p);
  const ForceLayout lay = layout_for({-1, 3}, 6, 1.0);
  const BaseTrajectory base = map.trajectory(white_state(16, 9), sample_force(lay, 9, 0, 0));
  const ForceProfile xi = sample_force(lay, 9, 1, 0);
  const SpectralState v = map.tangent(base, xi);
  for (std::size_t m = 0; m < lay.modes.size(); ++m)
    EXPECT_NEAR(std::abs(v[lay.modes[m]] - duhamel(0.0, p.lambda(lay.modes[m]), xi, m)), 0.0, 1e-14);
  EXPECT_EQ(v[0], Complex(0.0, 0.0));
}

TEST(Tangent, MatchesCentralDifferences) {
  const ShiftMap map{CglParams()};
  const ForceLayout lay = default_layout();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const SpectralState u0 = random_state(64, 1.5, 100 + s);
    const ForceProfile eta = sample_force(lay, 10, s, 0);
    const ForceProfile xi = sample_force(lay, 10, s, 0, StreamTag::direction);
    const double h = 1e-4;
    const SpectralState fd =
        (0.5 / h) * (map.step(u0, axpy(h, xi, eta)) - map.step(u0, axpy(-h, xi, eta)));
    const SpectralState v = map.tangent(map.trajectory(u0, eta), xi);
    EXPECT_LE(rel_err(v, fd), 1e-4) << s;
  }
}

TEST(Tangent, StateDerivativeMatchesCentralDifferences) {
  const ShiftMap map{CglParams()};
  const ForceProfile eta = sample_force(default_layout(), 11, 0, 0);
  const SpectralState u0 = random_state(64, 1.5, 11);
  const SpectralState w = random_state(64, 1.0, 12);
  const double h = 1e-5;
  const SpectralState fd = (0.5 / h) * (map.step(u0 + h * w, eta) - map.step(u0 - h * w, eta));
  EXPECT_LE(rel_err(map.state_tangent(map.trajectory(u0, eta), w), fd), 1e-6);
}

TEST(Tangent, RequiresMatchingBase) {
  CglParams coarse;
  CglParams fine;
  fine.dt_log2 = 10;
  const ForceLayout lay = default_layout();
  const BaseTrajectory base = ShiftMap(coarse).trajectory(SpectralState(64), zero_force(lay));
  EXPECT_THROW(ShiftMap(fine).tangent(base, zero_force(lay)), StateError);
  EXPECT_THROW(ShiftMap(coarse).tangent(BaseTrajectory{}, zero_force(lay)), StateError);
}

TEST(Simulate, ReturnsIntegerTimeStates) {
  const ShiftMap map{CglParams()};
  const ForceLayout lay = default_layout();
  const SpectralState u0 = random_state(64, 0.5, 13);
  const auto states = simulate(u0, lay, map, 13, 2, 3);
  ASSERT_EQ(states.size(), 4u);
  EXPECT_EQ(states[0], u0);
  EXPECT_EQ(states[2], map.step(states[1], sample_force(lay, 13, 2, 1)));
}

TEST(Linearized, ColumnCount) {
  const ShiftMap map{CglParams()};
  const ForceLayout lay = layout_for({-1, 0, 1});
  const LinearizedOperator op =
      build_linearized(SpectralState(64), sample_force(lay, 1, 0, 0), map, 2, 16);
  EXPECT_EQ(op.cols(), 42);
  EXPECT_EQ(op.rows(), 32);
}

TEST(Linearized, ResolvedModeOrder) {
  EXPECT_EQ(resolved_modes(64, 5), (std::vector<int>{0, 1, -1, 2, -2}));
  EXPECT_EQ(resolved_modes(4, 4), (std::vector<int>{0, 1, -1, 2}));
  EXPECT_THROW(resolved_modes(8, 9), ConfigError);
}

TEST(Linearized, ActionEqualsTangentAndIsLinear) {
  const ShiftMap map{CglParams()};
  const ForceLayout lay = default_layout();
  const ForceProfile eta = sample_force(lay, 14, 0, 0);
  const BaseTrajectory base = map.trajectory(random_state(64, 1.5, 14), eta);
  const int k_ctl = 1;
  const LinearizedOperator op = build_linearized(base, eta, map, k_ctl, 16);
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> U(-1, 1);
  Eigen::VectorXd x(op.cols()), y(op.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] = U(rng);
    y[i] = U(rng);
  }
  const SpectralState v = map.tangent(base, extract_from_E(zero_force(lay), x, k_ctl));
  const Eigen::VectorXd direct = project_resolved(v, op.resolved);
  EXPECT_LE((op.apply(x) - direct).norm(), 1e-10 * direct.norm());
  EXPECT_LE((op.apply(x + 2.5 * y) - op.apply(x) - 2.5 * op.apply(y)).norm(), 1e-10 * direct.norm());
}

TEST(Linearized, LinearCaseIsBlockDiagonal) {
  CglParams p = linear_params();
  const ShiftMap map(p);
  const ForceLayout lay = layout_for({0, 2}, 6, 1.0);
  const LinearizedOperator op =
      build_linearized(SpectralState(16), sample_force(lay, 15, 0, 0), map, 1, 8);
  // resolved order 0, 1, -1, 2, -2, 3, -3, 4 -> rows 2r, 2r+1
  const auto row_of = [&](int k, int part) {
    for (std::size_t r = 0; r < op.resolved.size(); ++r)
      if (op.resolved[r] == k)
        return static_cast<Eigen::Index>(2 * r + part);
    return Eigen::Index{-1};
  };
  for (Eigen::Index c = 0; c < op.cols(); ++c) {
    const EmbeddingSlot s = embedding_slot(static_cast<int>(c), 1);
    const int k = lay.modes[s.mode];
    const double scale = op.matrix.col(c).norm();
    for (Eigen::Index r = 0; r < op.rows(); ++r) {
      const bool own = r == row_of(k, 0) || r == row_of(k, 1);
      if (!own) {
        EXPECT_EQ(op.matrix(r, c), 0.0);
      }
    }
    // the real channel drives the real part only, up to rounding in the
    // complex exponential weights
    const Eigen::Index other = row_of(k, s.channel == Channel::real ? 1 : 0);
    EXPECT_LE(std::abs(op.matrix(other, c)), 1e-14 * scale);
  }
}

TEST(Linearized, WorkerCountDoesNotChangeMatrix) {
  const ShiftMap map{CglParams()};
  const ForceLayout lay = default_layout();
  const ForceProfile eta = sample_force(lay, 16, 0, 0);
  const BaseTrajectory base = map.trajectory(random_state(64, 1.0, 16), eta);
  const LinearizedOperator a = build_linearized(base, eta, map, 0, 16, 1);
  const LinearizedOperator b = build_linearized(base, eta, map, 0, 16, 3);
  EXPECT_TRUE(a.matrix == b.matrix);
  EXPECT_THROW(build_linearized(base, eta, map, 7, 16), std::invalid_argument);
}
