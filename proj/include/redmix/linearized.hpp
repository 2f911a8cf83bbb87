#ifndef REDMIX_LINEARIZED_HPP_
#define REDMIX_LINEARIZED_HPP_

#include <cstdlib>
#include <vector>

#include <Eigen/Dense>

#include "redmix/noise.hpp"
#include "redmix/parallel.hpp"
#include "redmix/shift_map.hpp"
#include "redmix/spectral.hpp"

namespace redmix {

/// The n lowest wavenumbers ordered 0, 1, -1, 2, -2, ...
inline std::vector<int> resolved_modes(int n_modes, int n_resolved) {
  if (n_resolved < 1 || n_resolved > n_modes)
    throw ConfigError("linop.n_resolved must lie in [1, grid.n_modes]");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n_resolved));
  out.push_back(0);
  for (int k = 1; static_cast<int>(out.size()) < n_resolved; ++k) {
    out.push_back(k);
    if (static_cast<int>(out.size()) < n_resolved && -k > -n_modes / 2)
      out.push_back(-k);
  }
  return out;
}

/// Real vector (Re u_k, Im u_k) over the resolved modes, in resolved order.
inline Eigen::VectorXd project_resolved(const SpectralState &u,
                                        const std::vector<int> &modes) {
  Eigen::VectorXd out(2 * static_cast<Eigen::Index>(modes.size()));
  for (std::size_t r = 0; r < modes.size(); ++r) {
    const Complex z = u[modes[r]];
    out[2 * static_cast<Eigen::Index>(r)] = z.real();
    out[2 * static_cast<Eigen::Index>(r) + 1] = z.imag();
  }
  return out;
}

/*
 * Dense matrix of D_eta S(u0, eta) restricted to the truncated E basis
 * (columns, ordered as embed_in_E) and the resolved H components (rows).
 */
struct LinearizedOperator {
  Eigen::MatrixXd matrix;
  std::vector<int> resolved;
  int k_ctl = 0;
  SpectralState base_state;
  ForceProfile base_force;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }

  Eigen::VectorXd apply(const Eigen::VectorXd &coeffs) const { return matrix * coeffs; }
};

/// Source for E-basis direction `column`: a_j c_k h_{k,l}(t) (times i) on mode j.
inline ForcingSchedule basis_schedule(const ForceProfile &force, int k_ctl, int column,
                                      const CglParams &params) {
  const EmbeddingSlot slot = embedding_slot(column, k_ctl);
  const double scale =
      force.amplitudes[slot.mode] *
      force.path(slot.mode, slot.channel).coefficients[static_cast<std::size_t>(slot.haar.level)];
  const Complex unit = slot.channel == Channel::real ? Complex(1.0, 0.0) : Complex(0.0, 1.0);
  const int row = SpectralState::slot_of(force.modes[slot.mode], params.n_modes);
  const int steps = params.steps_per_unit();
  ForcingSchedule f = ForcingSchedule::Zero(params.n_modes, steps);
  for (int n = 0; n < steps; ++n) {
    const double h = haar_eval(slot.haar, (n + 0.5) * params.dt());
    if (h != 0.0)
      f(row, n) = scale * h * unit;
  }
  return f;
}

/// Builds D from an existing base trajectory; one tangent solve per column.
inline LinearizedOperator build_linearized(const BaseTrajectory &base,
                                           const ForceProfile &force,
                                           const ShiftMap &map, int k_ctl,
                                           int n_resolved, unsigned workers = 1) {
  check_truncation(force, k_ctl);
  check_forcing_resolved(force.max_level(), map.params());
  LinearizedOperator op;
  op.resolved = resolved_modes(map.params().n_modes, n_resolved);
  op.k_ctl = k_ctl;
  op.base_state = base.initial;
  op.base_force = force;
  const int cols = embedding_dim(force.size(), k_ctl);
  op.matrix.resize(2 * n_resolved, cols);
  parallel_for(static_cast<std::size_t>(cols), workers, [&](std::size_t j) {
    const auto col = static_cast<int>(j);
    const SpectralState v =
        map.tangent(base, basis_schedule(force, k_ctl, col, map.params()));
    op.matrix.col(col) = project_resolved(v, op.resolved);
  });
  return op;
}

inline LinearizedOperator build_linearized(const SpectralState &u0,
                                           const ForceProfile &force,
                                           const ShiftMap &map, int k_ctl,
                                           int n_resolved, unsigned workers = 1) {
  return build_linearized(map.trajectory(u0, force), force, map, k_ctl, n_resolved,
                          workers);
}

} // namespace redmix

#endif // REDMIX_LINEARIZED_HPP_
