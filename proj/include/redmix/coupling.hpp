#ifndef REDMIX_COUPLING_HPP_
#define REDMIX_COUPLING_HPP_

/*
 * Two-trajectory coupling of the shift-map dynamics.
 *
 * u is always driven by the unmodified noise eta_k. v is driven by eta'_k:
 *   - an independent copy of eta_k when ||u - v|| > delta0;
 *   - eta_k - delta Phi when the homological equation D_eta S(u, eta) Phi =
 *     S^Delta is solved with relative residual <= rho_max and the perturbed
 *     draws stay inside the support;
 *   - eta_k itself otherwise (the trivial coupling).
 */

#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "redmix/errors.hpp"
#include "redmix/linearized.hpp"
#include "redmix/noise.hpp"
#include "redmix/shift_map.hpp"

namespace redmix {

struct CouplingPolicy {
  double delta0 = 1e-2;       // case threshold in H
  double rho_max = 0.2;       // accepted relative homological residual
  double lambda_reg = 1e-8;   // ridge, relative to sigma_max^2
  double xi_max = 1.0;        // support guard on perturbed draws
  int max_steps = 100;
  double coalesce_tol = 1e-12;
  int k_ctl = 0;
  int n_resolved = 16;
  unsigned workers = 1;       // threads used to build D

  void validate() const {
    if (!(delta0 > 0.0))
      throw ConfigError("coupling.delta0 must be positive");
    if (!(rho_max > 0.0 && rho_max < 1.0))
      throw ConfigError("coupling.rho_max must lie in (0, 1)");
    if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg))
      throw ConfigError("coupling.lambda_reg must be nonnegative");
    if (!(xi_max > 0.0))
      throw ConfigError("coupling.xi_max must be positive");
    if (max_steps < 1)
      throw ConfigError("coupling.max_steps must be at least 1");
    if (!(coalesce_tol >= 0.0))
      throw ConfigError("coupling.coalesce_tol must be nonnegative");
  }
};

enum class Branch { independent, homological, trivial };

inline std::string_view branch_name(Branch b) {
  switch (b) {
  case Branch::independent:
    return "independent";
  case Branch::homological:
    return "homological";
  case Branch::trivial:
    return "trivial";
  }
  return "?";
}

struct CouplingRow {
  int step = 0;                    // k, the row describes the move k-1 -> k
  Branch branch = Branch::trivial;
  double delta = 0.0;              // ||u_k - v_k||
  double delta_in = 0.0;           // ||u_{k-1} - v_{k-1}||
  std::optional<double> residual;  // rho, when the homological solve ran
  std::optional<double> phi_norm;  // delta ||Phi||, when the solve ran
  bool guard_violation = false;
};

struct CouplingRecord {
  double initial_delta = 0.0;
  std::vector<CouplingRow> rows;
  bool coalesced = false;
};

// ---------------------------------------------------------------------------

/// delta^-1 (S(v0, eta) - S(u0, eta)).
inline SpectralState s_delta(const SpectralState &u0, const SpectralState &v0,
                             const ForceProfile &force, const ShiftMap &map) {
  const double delta = dist_H(u0, v0);
  if (delta == 0.0)
    throw std::invalid_argument("s_delta: u0 and v0 coincide");
  return (1.0 / delta) * (map.step(v0, force) - map.step(u0, force));
}

struct HomologicalSolution {
  Eigen::VectorXd phi;
  double residual = 0.0;
  double sigma_max = 0.0;
};

/*
 * Ridge least squares  min ||D phi - rhs||^2 + lambda ||phi||^2  through the
 * SVD of D, with lambda = lambda_rel * sigma_max^2. With lambda_rel = 0 the
 * minimum-norm solution is returned (singular values below the rank
 * threshold are dropped).
 */
inline HomologicalSolution solve_homological(const Eigen::MatrixXd &d,
                                             const Eigen::VectorXd &rhs,
                                             double lambda_rel) {
  if (rhs.size() != d.rows())
    throw std::invalid_argument("solve_homological: rhs size does not match D");
  HomologicalSolution sol;
  sol.phi = Eigen::VectorXd::Zero(d.cols());
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0)
    return sol;
  if (!d.allFinite() || !rhs.allFinite())
    throw NumericalError("homological equation has non-finite entries");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(d, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw NumericalError("SVD of the linearised operator failed");
  const Eigen::VectorXd &sigma = svd.singularValues();
  sol.sigma_max = sigma.size() > 0 ? sigma[0] : 0.0;
  const double lambda = lambda_rel * sol.sigma_max * sol.sigma_max;
  const double cutoff = sol.sigma_max * std::numeric_limits<double>::epsilon() *
                        static_cast<double>(std::max(d.rows(), d.cols()));
  const Eigen::VectorXd proj = svd.matrixU().transpose() * rhs;
  Eigen::VectorXd scaled = Eigen::VectorXd::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double s = sigma[i];
    if (s <= cutoff)
      continue;
    scaled[i] = proj[i] * s / (s * s + lambda);
  }
  sol.phi = svd.matrixV() * scaled;
  sol.residual = (d * sol.phi - rhs).norm() / rhs_norm;
  if (!sol.phi.allFinite())
    throw NumericalError("homological solve produced non-finite values");
  return sol;
}

inline HomologicalSolution solve_homological(const LinearizedOperator &op,
                                             const SpectralState &rhs,
                                             const CouplingPolicy &policy) {
  return solve_homological(op.matrix, project_resolved(rhs, op.resolved),
                           policy.lambda_reg);
}

// ---------------------------------------------------------------------------

struct CoupleStepResult {
  SpectralState u;
  SpectralState v;
  CouplingRow row;
  ForceProfile v_force;   // eta' actually used for v
  Eigen::VectorXd phi;    // empty unless the homological solve ran
};

/// Test hook: replaces the homological solution by zero.
struct CoupleStepOptions {
  bool zero_phi = false;
};

/*
 * One coupled move. `eta` drives u; `independent` supplies the case-b copy
 * and is only invoked when that branch fires.
 */
template <class IndependentSource>
CoupleStepResult couple_step(const SpectralState &u, const SpectralState &v,
                             const ForceProfile &eta, IndependentSource &&independent,
                             const CouplingPolicy &policy, const ShiftMap &map,
                             CoupleStepOptions options = {}) {
  CoupleStepResult out;
  const double delta = dist_H(u, v);
  out.row.delta_in = delta;

  if (delta > policy.delta0) {
    out.row.branch = Branch::independent;
    out.v_force = independent();
    out.u = map.step(u, eta);
    out.v = map.step(v, out.v_force);
    out.row.delta = dist_H(out.u, out.v);
    return out;
  }

  out.row.branch = Branch::trivial;
  out.v_force = eta;
  if (delta <= policy.coalesce_tol) {
    out.u = map.step(u, eta);
    out.v = map.step(v, eta);
    out.row.delta = dist_H(out.u, out.v);
    return out;
  }

  const ForcingSchedule schedule = forcing_schedule(eta, map.params());
  const BaseTrajectory base = map.trajectory(u, schedule);
  out.u = base.final_state;
  const SpectralState v_nominal = map.step(v, schedule);
  const SpectralState sdelta = (1.0 / delta) * (v_nominal - out.u);

  const LinearizedOperator op =
      build_linearized(base, eta, map, policy.k_ctl, policy.n_resolved, policy.workers);
  HomologicalSolution sol = solve_homological(op, sdelta, policy);
  if (options.zero_phi)
    sol.phi.setZero();
  out.phi = sol.phi;
  out.row.residual = sol.residual;
  out.row.phi_norm = delta * sol.phi.norm();

  if (sol.residual <= policy.rho_max) {
    const Eigen::VectorXd perturbed = embed_in_E(eta, policy.k_ctl) - delta * sol.phi;
    if (perturbed.cwiseAbs().maxCoeff() <= policy.xi_max) {
      out.row.branch = Branch::homological;
      out.v_force = extract_from_E(eta, perturbed, policy.k_ctl);
      out.v = map.step(v, out.v_force);
      out.row.delta = dist_H(out.u, out.v);
      return out;
    }
    out.row.guard_violation = true;
  }
  out.v = v_nominal;
  out.row.delta = dist_H(out.u, out.v);
  return out;
}

struct CouplingRun {
  CouplingRecord record;
  SpectralState u_final;
  SpectralState v_final;
  std::vector<SpectralState> u_history; // u_0..u_n, kept when requested
};

/*
 * Iterates couple_step. Step k of run `run` is driven by the stream
 * (seed, run, first_segment + k - 1, drive), the same stream `simulate`
 * uses, so the u marginal is exactly the plain forward simulation.
 */
inline CouplingRun run_coupling(const SpectralState &u0, const SpectralState &v0,
                                const ForceLayout &layout, const CouplingPolicy &policy,
                                const ShiftMap &map, std::uint64_t seed,
                                std::uint64_t run, int horizon,
                                bool keep_history = false,
                                std::uint64_t first_segment = 0) {
  if (horizon < 1)
    throw std::invalid_argument("run_coupling: horizon must be at least 1");
  policy.validate();
  CouplingRun out;
  out.record.initial_delta = dist_H(u0, v0);
  SpectralState u = u0, v = v0;
  if (keep_history)
    out.u_history.push_back(u);
  for (int k = 1; k <= horizon; ++k) {
    const auto segment = first_segment + static_cast<std::uint64_t>(k - 1);
    const ForceProfile eta = sample_force(layout, seed, run, segment);
    auto independent = [&] {
      return sample_force(layout, seed, run, segment, StreamTag::independent);
    };
    CoupleStepResult step = couple_step(u, v, eta, independent, policy, map);
    step.row.step = k;
    out.record.rows.push_back(step.row);
    u = std::move(step.u);
    v = std::move(step.v);
    if (keep_history)
      out.u_history.push_back(u);
    if (step.row.delta < policy.coalesce_tol) {
      out.record.coalesced = true;
      break;
    }
  }
  out.u_final = std::move(u);
  out.v_final = std::move(v);
  return out;
}

} // namespace redmix

#endif // REDMIX_COUPLING_HPP_
