#ifndef REDMIX_SHIFT_MAP_HPP_
#define REDMIX_SHIFT_MAP_HPP_

/*
 * The unit-time shift map S: (u0, eta on [0,1)) -> u(1) of the forced CGL
 * equation, and its derivative in the noise.
 *
 * Time stepping is ETDRK4 (Cox & Matthews) with the diagonal linear part
 * -(lambda_k + i gamma k^2) integrated exactly; the phi-function weights are
 * evaluated by a contour mean near the origin (Kassam & Trefethen). The
 * forcing is piecewise constant on the dyadic cells of the noise and the step
 * resolves those cells, so within each step it enters as a constant term that
 * ETDRK4 integrates exactly.
 *
 * The tangent model is the derivative of the discrete scheme itself, so
 * directional finite differences of S converge to it at second order.
 */

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "redmix/cgl.hpp"
#include "redmix/errors.hpp"
#include "redmix/noise.hpp"
#include "redmix/spectral.hpp"

namespace redmix {

/// Spectral forcing per time step: column n is the force on [n dt, (n+1) dt).
using ForcingSchedule = Eigen::MatrixXcd;

inline void check_forcing_resolved(int max_level, const CglParams &params) {
  if (params.dt_log2 < max_level + 1)
    throw ConfigError("grid.dt_log2 must be at least noise.K + 1 so that each "
                      "step lies inside one noise cell");
}

inline ForcingSchedule forcing_schedule(const ForceProfile &force,
                                        const CglParams &params) {
  check_forcing_resolved(force.max_level(), params);
  const int steps = params.steps_per_unit();
  const double dt = params.dt();
  ForcingSchedule f = ForcingSchedule::Zero(params.n_modes, steps);
  for (std::size_t m = 0; m < force.size(); ++m) {
    const int slot = SpectralState::slot_of(force.modes[m], params.n_modes);
    for (int n = 0; n < steps; ++n)
      f(slot, n) = eval_force_mode(force, m, (n + 0.5) * dt);
  }
  return f;
}

/// The force at time t as an element of H_M.
inline SpectralState eval_force(const ForceProfile &force, double t, int n_modes) {
  SpectralState out(n_modes);
  for (std::size_t m = 0; m < force.size(); ++m)
    out[force.modes[m]] += eval_force_mode(force, m, t);
  return out;
}

/// Stage values of one S evaluation, kept for tangent solves.
struct BaseTrajectory {
  SpectralState initial;
  SpectralState final_state;
  // Padded physical fields at u_n and the three ETDRK4 stages, 4 per step.
  std::vector<Eigen::VectorXcd> stage_fields;
  int steps = 0;
};

class ShiftMap {
 public:
  explicit ShiftMap(CglParams params) : params_(params) {
    params_.validate();
    const int n = params_.n_modes;
    const double h = params_.dt();
    e_.resize(n);
    e2_.resize(n);
    q_.resize(n);
    f1_.resize(n);
    f2_.resize(n);
    f3_.resize(n);
    for (int i = 0; i < n; ++i) {
      const int k = SpectralState::wavenumber_at(i, n);
      Complex c(-params_.lambda(k), 0.0);
      if (params_.nonlinear)
        c -= Complex(0.0, params_.gamma * k * k);
      set_weights(i, c * h, h);
    }
  }

  const CglParams &params() const { return params_; }

  SpectralState step(const SpectralState &u0, const ForceProfile &force) const {
    return step(u0, forcing_schedule(force, params_));
  }

  SpectralState step(const SpectralState &u0, const ForcingSchedule &forcing,
                     BaseTrajectory *keep = nullptr) const {
    check_state(u0);
    if (forcing.rows() != params_.n_modes || forcing.cols() != params_.steps_per_unit())
      throw std::invalid_argument("forcing schedule has the wrong shape");
    const int steps = params_.steps_per_unit();
    Workspace ws(params_);
    if (keep) {
      keep->initial = u0;
      keep->steps = steps;
      keep->stage_fields.assign(params_.nonlinear ? 4 * steps : 0, Eigen::VectorXcd());
    }
    Eigen::VectorXcd u = u0.coefficients();
    Eigen::VectorXcd nu, na, nb, nc, a, b, c;
    for (int s = 0; s < steps; ++s) {
      const auto f = forcing.col(s);
      Eigen::VectorXcd *stage = keep && params_.nonlinear ? &keep->stage_fields[4 * s] : nullptr;
      rhs(u, f, ws, nu, stage);
      a = e2_.cwiseProduct(u) + q_.cwiseProduct(nu);
      rhs(a, f, ws, na, stage ? stage + 1 : nullptr);
      b = e2_.cwiseProduct(u) + q_.cwiseProduct(na);
      rhs(b, f, ws, nb, stage ? stage + 2 : nullptr);
      c = e2_.cwiseProduct(a) + q_.cwiseProduct(2.0 * nb - nu);
      rhs(c, f, ws, nc, stage ? stage + 3 : nullptr);
      u = e_.cwiseProduct(u) + f1_.cwiseProduct(nu) +
          2.0 * f2_.cwiseProduct(na + nb) + f3_.cwiseProduct(nc);
      if (!u.allFinite())
        throw NumericalError("CGL solution blew up", (s + 1) * params_.dt());
    }
    SpectralState out(std::move(u));
    if (keep)
      keep->final_state = out;
    return out;
  }

  BaseTrajectory trajectory(const SpectralState &u0, const ForceProfile &force) const {
    return trajectory(u0, forcing_schedule(force, params_));
  }

  BaseTrajectory trajectory(const SpectralState &u0, const ForcingSchedule &forcing) const {
    BaseTrajectory traj;
    step(u0, forcing, &traj);
    return traj;
  }

  /// D_eta S(u0, eta) xi: linearised solve with v(0) = 0 and source xi.
  SpectralState tangent(const BaseTrajectory &base, const ForceProfile &xi) const {
    return tangent(base, forcing_schedule(xi, params_));
  }

  SpectralState tangent(const BaseTrajectory &base, const ForcingSchedule &source) const {
    return linearized(base, SpectralState(params_.n_modes), &source);
  }

  /// D_u S(u0, eta) w: linearised solve with v(0) = w and no source.
  SpectralState state_tangent(const BaseTrajectory &base, const SpectralState &w) const {
    return linearized(base, w, nullptr);
  }

 private:
  struct Workspace {
    explicit Workspace(const CglParams &p)
        : transform(p.n_modes, p.padded_size()) {}
    PaddedTransform transform;
    Eigen::VectorXcd phys;
    Eigen::VectorXcd poly;
  };

  void check_state(const SpectralState &u) const {
    if (u.n_modes() != params_.n_modes)
      throw std::invalid_argument("state size does not match grid.n_modes");
  }

  // N(u) = f - P_N(i|u|^{2p}u)
  template <class Col>
  void rhs(const Eigen::VectorXcd &u, const Col &f, Workspace &ws,
           Eigen::VectorXcd &out, Eigen::VectorXcd *keep) const {
    if (!params_.nonlinear) {
      out = f;
      return;
    }
    detail::polynomial_term(u, params_.p, ws.transform, ws.phys, ws.poly, keep);
    out = f - ws.poly;
  }

  void tangent_rhs(const Eigen::VectorXcd &u_phys, const Eigen::VectorXcd &v,
                   const ForcingSchedule *source, int s, Workspace &ws,
                   Eigen::VectorXcd &out) const {
    if (source)
      out = source->col(s);
    else
      out.setZero(params_.n_modes);
    if (!params_.nonlinear)
      return;
    detail::polynomial_derivative(u_phys, v, params_.p, ws.transform, ws.phys, ws.poly);
    out -= ws.poly;
  }

  SpectralState linearized(const BaseTrajectory &base, const SpectralState &v0,
                           const ForcingSchedule *source) const {
    check_state(v0);
    if (base.steps != params_.steps_per_unit() ||
        base.stage_fields.size() != static_cast<std::size_t>(params_.nonlinear ? 4 * base.steps : 0))
      throw StateError("tangent solve needs a base trajectory from this shift map");
    if (source && (source->rows() != params_.n_modes || source->cols() != base.steps))
      throw std::invalid_argument("tangent source has the wrong shape");
    Workspace ws(params_);
    static const Eigen::VectorXcd none;
    Eigen::VectorXcd v = v0.coefficients();
    Eigen::VectorXcd nu, na, nb, nc, a, b, c;
    for (int s = 0; s < base.steps; ++s) {
      const auto field = [&](int stage) -> const Eigen::VectorXcd & {
        return params_.nonlinear ? base.stage_fields[4 * s + stage] : none;
      };
      tangent_rhs(field(0), v, source, s, ws, nu);
      a = e2_.cwiseProduct(v) + q_.cwiseProduct(nu);
      tangent_rhs(field(1), a, source, s, ws, na);
      b = e2_.cwiseProduct(v) + q_.cwiseProduct(na);
      tangent_rhs(field(2), b, source, s, ws, nb);
      c = e2_.cwiseProduct(a) + q_.cwiseProduct(2.0 * nb - nu);
      tangent_rhs(field(3), c, source, s, ws, nc);
      v = e_.cwiseProduct(v) + f1_.cwiseProduct(nu) +
          2.0 * f2_.cwiseProduct(na + nb) + f3_.cwiseProduct(nc);
    }
    if (!v.allFinite())
      throw NumericalError("tangent solution blew up", 1.0);
    return SpectralState(std::move(v));
  }

  void set_weights(int i, Complex z, double h) {
    e_[i] = std::exp(z);
    e2_[i] = std::exp(0.5 * z);
    const auto q = [](Complex r) { return (std::exp(0.5 * r) - 1.0) / r; };
    const auto g1 = [](Complex r) {
      return (-4.0 - r + std::exp(r) * (4.0 - 3.0 * r + r * r)) / (r * r * r);
    };
    const auto g2 = [](Complex r) {
      return (2.0 + r + std::exp(r) * (r - 2.0)) / (r * r * r);
    };
    const auto g3 = [](Complex r) {
      return (-4.0 - 3.0 * r - r * r + std::exp(r) * (4.0 - r)) / (r * r * r);
    };
    if (std::abs(z) >= 0.5) {
      q_[i] = h * q(z);
      f1_[i] = h * g1(z);
      f2_[i] = h * g2(z);
      f3_[i] = h * g3(z);
      return;
    }
    // Mean over a unit circle around z; every node stays >= 0.5 from 0.
    constexpr int nodes = 64;
    Complex sq(0.0), s1(0.0), s2(0.0), s3(0.0);
    for (int m = 0; m < nodes; ++m) {
      const double theta = 2.0 * M_PI * (m + 0.5) / nodes;
      const Complex r = z + std::polar(1.0, theta);
      sq += q(r);
      s1 += g1(r);
      s2 += g2(r);
      s3 += g3(r);
    }
    q_[i] = h * sq / double(nodes);
    f1_[i] = h * s1 / double(nodes);
    f2_[i] = h * s2 / double(nodes);
    f3_[i] = h * s3 / double(nodes);
  }

  CglParams params_;
  Eigen::VectorXcd e_, e2_, q_, f1_, f2_, f3_;
};

// Free-function spellings of the shift-map operations.

inline SpectralState step_S(const SpectralState &u0, const ForceProfile &force,
                            const ShiftMap &map) {
  return map.step(u0, force);
}

inline SpectralState tangent_step(const BaseTrajectory &base, const ForceProfile &xi,
                                  const ShiftMap &map) {
  return map.tangent(base, xi);
}

/// Integer-time states u(0), u(1), ..., u(n) of one driven trajectory.
inline std::vector<SpectralState> simulate(const SpectralState &u0,
                                           const ForceLayout &layout,
                                           const ShiftMap &map, std::uint64_t seed,
                                           std::uint64_t trajectory, int n_steps) {
  std::vector<SpectralState> out;
  out.reserve(static_cast<std::size_t>(n_steps) + 1);
  out.push_back(u0);
  for (int s = 0; s < n_steps; ++s)
    out.push_back(map.step(out.back(), sample_force(layout, seed, trajectory,
                                                    static_cast<std::uint64_t>(s))));
  return out;
}

} // namespace redmix

#endif // REDMIX_SHIFT_MAP_HPP_
