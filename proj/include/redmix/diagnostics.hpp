#ifndef REDMIX_DIAGNOSTICS_HPP_
#define REDMIX_DIAGNOSTICS_HPP_

/*
 * Empirical checks of the hypotheses behind exponential mixing and of the
 * conclusion itself:
 *
 *   absorbing ball (H1), exponential stability of zero (H2), rank of the
 *   linearised control map (H3), decay of the distance between the laws of
 *   two ensembles, contraction of the coupled pair, and closeness of the
 *   perturbed noise law to the nominal one.
 *
 * Every routine is deterministic given the experiment seed; ensembles run on
 * `workers` threads with per-trajectory streams.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "redmix/coupling.hpp"
#include "redmix/errors.hpp"
#include "redmix/linearized.hpp"
#include "redmix/noise.hpp"
#include "redmix/parallel.hpp"
#include "redmix/shift_map.hpp"
#include "redmix/stats.hpp"

namespace redmix {

/// The dynamics, the force law and the randomness shared by all studies.
struct Experiment {
  ShiftMap map;
  ForceLayout layout;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  int n_modes() const { return map.params().n_modes; }
};

/// Burn-in noise lives in its own trajectory range so it never collides
/// with the streams of coupling runs or ensembles.
inline std::uint64_t burn_in_trajectory(std::uint64_t index) {
  return index + (std::uint64_t{1} << 40);
}

/// Unit-norm random state with spectrum decaying like 1/(1 + k^2).
inline SpectralState random_profile(int n_modes, Rng &rng) {
  std::normal_distribution<double> g;
  SpectralState u(n_modes);
  for (int s = 0; s < n_modes; ++s) {
    const double k = SpectralState::wavenumber_at(s, n_modes);
    const double re = g(rng);
    const double im = g(rng);
    u.coefficients()[s] = Complex(re, im) / (1.0 + k * k);
  }
  u *= 1.0 / norm_H(u);
  return u;
}

/// State after `burn_in` unit steps from zero along burn-in trajectory `index`.
inline SpectralState absorbed_state(const Experiment &ex, std::uint64_t index, int burn_in) {
  SpectralState u(ex.n_modes());
  for (int s = 0; s < burn_in; ++s)
    u = ex.map.step(u, sample_force(ex.layout, ex.seed, burn_in_trajectory(index),
                                    static_cast<std::uint64_t>(s)));
  return u;
}

/*
 * Unit steps for large data. The cubic term is treated explicitly, so a step
 * is stable only while dt ||u||^2 stays small; each unit step uses the
 * coarsest dt = 2^-j (j >= the configured level) with dt ||u||^2 <= 1/8.
 * States of moderate norm take the configured step, bit for bit.
 */
class GuardedStepper {
 public:
  explicit GuardedStepper(const ShiftMap &base) : base_(base.params().dt_log2) {
    for (int j = 0; j <= max_refine; ++j) {
      CglParams p = base.params();
      p.dt_log2 = base_ + j;
      maps_.emplace_back(p);
    }
  }

  SpectralState step(const SpectralState &u, const ForceProfile &force) const {
    const double load = 8.0 * norm_H(u) * norm_H(u);
    int j = 0;
    while (j < max_refine && std::ldexp(1.0, base_ + j) < load)
      ++j;
    return maps_[static_cast<std::size_t>(j)].step(u, force);
  }

 private:
  static constexpr int max_refine = 6;
  int base_;
  std::vector<ShiftMap> maps_;
};

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

struct Observable {
  std::string name;
  std::function<double(const SpectralState &)> eval;
};

/// "norm2" (||u||^2), "re:K" or "im:K" (real / imaginary part of u_K).
inline Observable parse_observable(std::string_view name, int n_modes) {
  const std::string n(name);
  if (n == "norm2")
    return {n, [](const SpectralState &u) { return norm_H(u) * norm_H(u); }};
  if (n.size() > 3 && (n.rfind("re:", 0) == 0 || n.rfind("im:", 0) == 0)) {
    int k = 0;
    try {
      std::size_t used = 0;
      k = std::stoi(n.substr(3), &used);
      if (used != n.size() - 3)
        throw std::invalid_argument(n);
    } catch (const std::exception &) {
      throw ConfigError("bad observable '" + n + "'");
    }
    if (k <= -n_modes / 2 || k > n_modes / 2)
      throw ConfigError("observable mode out of band: '" + n + "'");
    if (n[0] == 'r')
      return {n, [k](const SpectralState &u) { return u[k].real(); }};
    return {n, [k](const SpectralState &u) { return u[k].imag(); }};
  }
  throw ConfigError("unknown observable '" + n + "'");
}

inline std::vector<std::string> default_observable_names() {
  return {"norm2", "re:0", "im:0", "re:1", "im:1", "re:-1", "im:-1"};
}

// ---------------------------------------------------------------------------
// H1: absorbing ball
// ---------------------------------------------------------------------------

struct AbsorbingLevel {
  double initial_norm = 0.0;
  double radius = 0.0;  // sup ||u(t)|| over members, t in the tail window
  int entry_time = 0;   // latest first time after which ||u|| <= R, over members
  double h1_sup = 0.0;  // sup of the H^1 seminorm in the tail window
};

struct AbsorbingReport {
  double radius = 0.0;
  double spread = 0.0; // max_i R_i / min_i R_i - 1
  int trajectories = 0;
  int horizon = 0;
  std::vector<AbsorbingLevel> levels;
  bool failed = false;
  std::string failure;
};

/*
 * Ensembles started at `levels` initial norms from 0 to max_norm (0 means
 * ten times the radius measured from u0 = 0). Member j of every level uses
 * noise trajectory j, so levels differ only by the initial condition. The
 * radius is the sup of ||u(t)|| over t in [horizon/2, horizon].
 */
inline AbsorbingReport verify_absorbing(const Experiment &ex, int levels, int members,
                                        int horizon, double max_norm = 0.0) {
  if (levels < 2 || members < 1 || horizon < 2)
    throw std::invalid_argument("verify_absorbing: need >= 2 levels, >= 1 member, horizon >= 2");
  AbsorbingReport report;
  report.horizon = horizon;
  report.trajectories = levels * members;
  const int tail = horizon / 2;

  struct Run {
    std::vector<double> norms;
    std::vector<double> h1;
  };
  auto run_level = [&](double norm, std::vector<Run> &runs) {
    runs.assign(static_cast<std::size_t>(members), {});
    parallel_for(static_cast<std::size_t>(members), ex.workers, [&](std::size_t j) {
      Rng rng = make_stream(ex.seed, j, 0, StreamTag::initial);
      SpectralState u = norm * random_profile(ex.n_modes(), rng);
      const GuardedStepper stepper(ex.map);
      Run &r = runs[j];
      r.norms.push_back(norm_H(u));
      r.h1.push_back(h1_seminorm(u));
      for (int s = 0; s < horizon; ++s) {
        u = stepper.step(u, sample_force(ex.layout, ex.seed, j, static_cast<std::uint64_t>(s)));
        r.norms.push_back(norm_H(u));
        r.h1.push_back(h1_seminorm(u));
      }
    });
  };
  auto tail_sup = [&](const std::vector<Run> &runs, bool h1) {
    double s = 0.0;
    for (const Run &r : runs)
      for (int t = tail; t <= horizon; ++t)
        s = std::max(s, (h1 ? r.h1 : r.norms)[static_cast<std::size_t>(t)]);
    return s;
  };

  std::vector<std::vector<Run>> all(static_cast<std::size_t>(levels));
  try {
    run_level(0.0, all[0]);
    if (max_norm <= 0.0)
      max_norm = 10.0 * tail_sup(all[0], false);
    for (int i = 1; i < levels; ++i)
      run_level(max_norm * i / (levels - 1), all[static_cast<std::size_t>(i)]);
  } catch (const NumericalError &e) {
    report.failed = true;
    report.failure = e.what();
    return report;
  }

  double rmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < levels; ++i) {
    AbsorbingLevel lv;
    lv.initial_norm = max_norm * i / (levels - 1);
    lv.radius = tail_sup(all[static_cast<std::size_t>(i)], false);
    lv.h1_sup = tail_sup(all[static_cast<std::size_t>(i)], true);
    report.radius = std::max(report.radius, lv.radius);
    rmin = std::min(rmin, lv.radius);
    report.levels.push_back(lv);
  }
  report.spread = report.radius / rmin - 1.0;
  for (int i = 0; i < levels; ++i) {
    int entry = 0;
    for (const Run &r : all[static_cast<std::size_t>(i)]) {
      int first = horizon + 1;
      for (int t = horizon; t >= 0 && r.norms[static_cast<std::size_t>(t)] <= report.radius; --t)
        first = t;
      entry = std::max(entry, first);
    }
    report.levels[static_cast<std::size_t>(i)].entry_time = entry;
  }
  return report;
}

/// Tail sup of ||u(t)|| over t in [horizon/2, horizon] for members started at 0.
inline double pilot_radius(const Experiment &ex, int members, int horizon) {
  std::vector<double> sup(static_cast<std::size_t>(members), 0.0);
  parallel_for(sup.size(), ex.workers, [&](std::size_t j) {
    SpectralState u(ex.n_modes());
    for (int s = 0; s < horizon; ++s) {
      u = ex.map.step(u, sample_force(ex.layout, ex.seed, j, static_cast<std::uint64_t>(s)));
      if (s + 1 >= horizon / 2)
        sup[j] = std::max(sup[j], norm_H(u));
    }
  });
  return *std::max_element(sup.begin(), sup.end());
}

// ---------------------------------------------------------------------------
// H2: stability of zero
// ---------------------------------------------------------------------------

struct DecaySample {
  double initial_norm = 0.0;
  double rate = 0.0;    // slope of log ||u(t)|| over the second half
  bool monotone = true; // ||u(t+1)|| <= ||u(t)|| at every integer time
};

struct ZeroStabilityReport {
  double expected_rate = 0.0; // -eps m0
  std::vector<DecaySample> samples;
  double min_rate = 0.0;      // fastest decay
  double median_rate = 0.0;
  bool monotone = true;
};

/// Unforced runs from each initial state, integer-time norms fitted on [h/2, h].
inline ZeroStabilityReport verify_zero_stability(const ShiftMap &map,
                                                 const std::vector<SpectralState> &initial,
                                                 int horizon, unsigned workers = 1) {
  if (horizon < 4 || initial.empty())
    throw std::invalid_argument("verify_zero_stability: need states and horizon >= 4");
  const CglParams &p = map.params();
  ZeroStabilityReport report;
  report.expected_rate = -p.epsilon * p.mass_shift;
  report.samples.resize(initial.size());
  const ForcingSchedule none = ForcingSchedule::Zero(p.n_modes, p.steps_per_unit());
  parallel_for(initial.size(), workers, [&](std::size_t i) {
    DecaySample &s = report.samples[i];
    SpectralState u = initial[i];
    s.initial_norm = norm_H(u);
    std::vector<double> t, logn;
    double prev = s.initial_norm;
    for (int k = 1; k <= horizon; ++k) {
      u = map.step(u, none);
      const double n = norm_H(u);
      if (n > prev * (1.0 + 1e-12))
        s.monotone = false;
      prev = n;
      if (k >= horizon / 2) {
        if (n <= 0.0)
          throw NumericalError("state decayed to exact zero; shorten the horizon");
        t.push_back(k);
        logn.push_back(std::log(n));
      }
    }
    s.rate = fit_line(t, logn).slope;
  });
  std::vector<double> rates;
  report.min_rate = std::numeric_limits<double>::infinity();
  for (const DecaySample &s : report.samples) {
    rates.push_back(s.rate);
    report.min_rate = std::min(report.min_rate, s.rate);
    report.monotone = report.monotone && s.monotone;
  }
  report.median_rate = median(rates);
  return report;
}

// ---------------------------------------------------------------------------
// H3: range of D_eta S
// ---------------------------------------------------------------------------

struct RankSample {
  Eigen::VectorXd singular_values;
  int rank = 0;
  bool full = false;
};

struct RankScanReport {
  int rows = 0;
  int cols = 0;
  double threshold = 1e-8; // relative to sigma_max
  std::vector<RankSample> samples;
  double full_fraction = 0.0;
};

inline RankSample rank_of(const Eigen::MatrixXd &d, double rel_threshold) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(d);
  RankSample s;
  s.singular_values = svd.singularValues();
  const double smax = s.singular_values.size() ? s.singular_values[0] : 0.0;
  for (Eigen::Index i = 0; i < s.singular_values.size(); ++i)
    if (s.singular_values[i] > rel_threshold * smax && smax > 0.0)
      ++s.rank;
  s.full = s.rank == d.rows();
  return s;
}

/// Singular values of D at absorbed states; full rank means all resolved rows reached.
inline RankScanReport h3_rank_scan(const Experiment &ex, int samples, int k_ctl,
                                   int n_resolved, int burn_in,
                                   double rel_threshold = 1e-8) {
  if (samples < 1)
    throw std::invalid_argument("h3_rank_scan: need at least one sample");
  RankScanReport report;
  report.threshold = rel_threshold;
  report.rows = 2 * n_resolved;
  report.cols = embedding_dim(ex.layout.modes.size(), k_ctl);
  report.samples.resize(static_cast<std::size_t>(samples));
  parallel_for(static_cast<std::size_t>(samples), ex.workers, [&](std::size_t i) {
    const SpectralState u = absorbed_state(ex, i, burn_in);
    const ForceProfile eta = sample_force(ex.layout, ex.seed, burn_in_trajectory(i),
                                          static_cast<std::uint64_t>(burn_in));
    const LinearizedOperator op = build_linearized(u, eta, ex.map, k_ctl, n_resolved);
    report.samples[i] = rank_of(op.matrix, rel_threshold);
  });
  int full = 0;
  for (const RankSample &s : report.samples)
    full += s.full ? 1 : 0;
  report.full_fraction = static_cast<double>(full) / samples;
  return report;
}

// ---------------------------------------------------------------------------
// Mixing: distance between the laws of two ensembles
// ---------------------------------------------------------------------------

struct MixRateReport {
  std::vector<double> times;
  std::vector<std::string> observables;
  std::vector<std::vector<double>> distances; // [observable][t], W1
  std::vector<double> max_distance;           // max over observables
  std::vector<double> noise_floor;            // split-sample estimate per t
  double floor_level = 0.0;                   // mean floor over [h/2, h]
  ExpFit fit;                                 // on max_distance above 2 floor_level
  int ensemble = 0;
};

/*
 * Ensembles of size P from u01 and u02. Member i of the first ensemble uses
 * noise trajectory i; member i of the second uses P + i, or i again when
 * `shared_noise` is set. The noise floor at time t is the W1 distance
 * between the two halves of each ensemble, scaled by 1/sqrt(2) to the
 * full-size comparison and averaged over the two ensembles.
 */
inline MixRateReport mixing_distance(const Experiment &ex, const SpectralState &u01,
                                     const SpectralState &u02, int ensemble, int horizon,
                                     const std::vector<Observable> &observables,
                                     bool shared_noise = false) {
  if (ensemble < 2 || horizon < 1 || observables.empty())
    throw std::invalid_argument("mixing_distance: need ensemble >= 2, horizon >= 1, observables");
  const auto n_obs = observables.size();
  const auto n_t = static_cast<std::size_t>(horizon) + 1;
  const auto p = static_cast<std::size_t>(ensemble);
  // values[e][member][t * n_obs + o]
  std::vector<std::vector<std::vector<double>>> values(
      2, std::vector<std::vector<double>>(p, std::vector<double>(n_t * n_obs)));
  parallel_for(2 * p, ex.workers, [&](std::size_t job) {
    const std::size_t e = job / p;
    const std::size_t i = job % p;
    const std::uint64_t traj = (e == 0 || shared_noise) ? i : p + i;
    SpectralState u = e == 0 ? u01 : u02;
    auto &row = values[e][i];
    for (std::size_t t = 0;; ++t) {
      for (std::size_t o = 0; o < n_obs; ++o)
        row[t * n_obs + o] = observables[o].eval(u);
      if (t + 1 == n_t)
        break;
      u = ex.map.step(u, sample_force(ex.layout, ex.seed, traj, t));
    }
  });

  MixRateReport report;
  report.ensemble = ensemble;
  for (const Observable &o : observables)
    report.observables.push_back(o.name);
  report.distances.assign(n_obs, std::vector<double>(n_t));
  report.max_distance.assign(n_t, 0.0);
  report.noise_floor.assign(n_t, 0.0);
  const std::size_t half = p / 2;
  for (std::size_t t = 0; t < n_t; ++t) {
    report.times.push_back(static_cast<double>(t));
    for (std::size_t o = 0; o < n_obs; ++o) {
      std::vector<double> a(p), b(p);
      for (std::size_t i = 0; i < p; ++i) {
        a[i] = values[0][i][t * n_obs + o];
        b[i] = values[1][i][t * n_obs + o];
      }
      const double d = wasserstein1(a, b);
      report.distances[o][t] = d;
      report.max_distance[t] = std::max(report.max_distance[t], d);
      const auto split = [&](const std::vector<double> &s) {
        return wasserstein1({s.begin(), s.begin() + static_cast<std::ptrdiff_t>(half)},
                            {s.begin() + static_cast<std::ptrdiff_t>(half), s.end()});
      };
      const double floor = 0.5 * (split(a) + split(b)) / std::sqrt(2.0);
      report.noise_floor[t] = std::max(report.noise_floor[t], floor);
    }
  }
  double acc = 0.0;
  int cnt = 0;
  for (std::size_t t = n_t / 2; t < n_t; ++t, ++cnt)
    acc += report.noise_floor[t];
  report.floor_level = acc / cnt;

  // Fit the decay phase: from t = 0 up to the first drop below twice the floor.
  std::vector<double> ft, fd;
  for (std::size_t t = 0; t < n_t && report.max_distance[t] > 2.0 * report.floor_level; ++t) {
    ft.push_back(report.times[t]);
    fd.push_back(report.max_distance[t]);
  }
  report.fit = fit_exponential(ft, fd);
  return report;
}

// ---------------------------------------------------------------------------
// Coupling studies
// ---------------------------------------------------------------------------

struct CouplingSample {
  SpectralState u;
  SpectralState v;
  ForceProfile eta;
  ForceProfile independent;
};

/*
 * u: absorbed state of burn-in trajectory `index`; v = u + delta * d with d
 * a random unit profile; eta: the next segment of the same noise trajectory.
 */
inline CouplingSample coupling_sample(const Experiment &ex, std::uint64_t index,
                                      double delta, int burn_in) {
  CouplingSample s;
  s.u = absorbed_state(ex, index, burn_in);
  Rng rng = make_stream(ex.seed, index, 0, StreamTag::direction);
  s.v = s.u + delta * random_profile(ex.n_modes(), rng);
  const auto traj = burn_in_trajectory(index);
  const auto seg = static_cast<std::uint64_t>(burn_in);
  s.eta = sample_force(ex.layout, ex.seed, traj, seg);
  s.independent = sample_force(ex.layout, ex.seed, traj, seg, StreamTag::independent);
  return s;
}

/// Largest ||S(u, eta) - S(v, eta)|| / ||u - v|| over sampled nearby pairs.
inline double empirical_lipschitz(const Experiment &ex, int samples, double delta, int burn_in) {
  std::vector<double> ratio(static_cast<std::size_t>(samples));
  parallel_for(ratio.size(), ex.workers, [&](std::size_t i) {
    const CouplingSample s = coupling_sample(ex, i, delta, burn_in);
    ratio[i] = dist_H(ex.map.step(s.u, s.eta), ex.map.step(s.v, s.eta)) / dist_H(s.u, s.v);
  });
  return *std::max_element(ratio.begin(), ratio.end());
}

struct ContractionReport {
  double delta = 0.0;
  int attempts = 0;
  int homological = 0;
  int contracted = 0;  // homological steps with ||u1 - v1|| <= delta / 2
  double fraction = 0.0; // contracted / homological
  std::vector<double> ratios; // ||u1 - v1|| / delta on homological steps
  std::vector<Branch> branches; // branch of every attempt
};

/*
 * Samples single coupled steps at distance delta until `target` steps took
 * the homological branch (or max_attempts is reached). Attempts are
 * processed in fixed blocks in index order, so the result does not depend
 * on the worker count.
 */
inline ContractionReport contraction_study(const Experiment &ex, double delta, int target,
                                           int max_attempts, CouplingPolicy policy,
                                           int burn_in) {
  policy.delta0 = std::max(policy.delta0, delta * (1.0 + 1e-9));
  policy.workers = 1;
  ContractionReport report;
  report.delta = delta;
  const int block = std::max(1, target);
  while (report.homological < target && report.attempts < max_attempts) {
    const int n = std::min(block, max_attempts - report.attempts);
    std::vector<CoupleStepResult> results(static_cast<std::size_t>(n));
    parallel_for(results.size(), ex.workers, [&](std::size_t j) {
      const CouplingSample s =
          coupling_sample(ex, static_cast<std::uint64_t>(report.attempts) + j, delta, burn_in);
      results[j] = couple_step(s.u, s.v, s.eta, [&] { return s.independent; }, policy, ex.map);
    });
    for (const CoupleStepResult &r : results) {
      if (report.homological >= target)
        break;
      ++report.attempts;
      report.branches.push_back(r.row.branch);
      if (r.row.branch != Branch::homological)
        continue;
      ++report.homological;
      const double ratio = r.row.delta / r.row.delta_in;
      report.ratios.push_back(ratio);
      if (ratio <= 0.5)
        ++report.contracted;
    }
  }
  report.fraction =
      report.homological ? static_cast<double>(report.contracted) / report.homological : 0.0;
  return report;
}

/*
 * Empirical exponent b in ||u1 - v1|| ~ delta^b on homological steps,
 * from medians at each delta. Reported, never asserted: the construction
 * only guarantees contraction by a fixed factor.
 */
inline LineFit contraction_exponent(const Experiment &ex, const std::vector<double> &deltas,
                                    int samples, const CouplingPolicy &policy, int burn_in) {
  std::vector<double> x, y;
  for (double d : deltas) {
    const ContractionReport r = contraction_study(ex, d, samples, 4 * samples, policy, burn_in);
    if (r.ratios.empty())
      continue;
    x.push_back(std::log(d));
    y.push_back(std::log(median(r.ratios) * d));
  }
  if (x.size() < 2)
    throw NumericalError("contraction_exponent: homological branch fired at < 2 deltas");
  return fit_line(x, y);
}

struct MarginalLawPoint {
  double delta = 0.0;
  double ks = 0.0;
  int samples = 0;
  int homological = 0;
  bool excluded = false; // branch never fired at this delta
};

struct MarginalLawReport {
  std::vector<MarginalLawPoint> points;
  double exponent = 0.0; // a in KS ~ delta^a
  double r2 = 0.0;
  bool fitted = false;
};

/*
 * For each delta, the pooled truncated draws xi of eta and xi' of the
 * perturbed eta' over the homological steps of `samples` common sampled
 * pairs; KS(xi', xi) is the proxy for the total-variation distance of the
 * two noise laws.
 */
inline MarginalLawReport marginal_law_distance(const Experiment &ex,
                                               const std::vector<double> &deltas,
                                               int samples, CouplingPolicy policy,
                                               int burn_in, CoupleStepOptions options = {}) {
  MarginalLawReport report;
  policy.workers = 1;
  for (double delta : deltas) {
    CouplingPolicy pol = policy;
    pol.delta0 = std::max(pol.delta0, delta * (1.0 + 1e-9));
    std::vector<CoupleStepResult> results(static_cast<std::size_t>(samples));
    std::vector<ForceProfile> etas(results.size());
    parallel_for(results.size(), ex.workers, [&](std::size_t i) {
      const CouplingSample s = coupling_sample(ex, i, delta, burn_in);
      etas[i] = s.eta;
      results[i] = couple_step(s.u, s.v, s.eta, [&] { return s.independent; }, pol, ex.map,
                               options);
    });
    MarginalLawPoint pt;
    pt.delta = delta;
    pt.samples = samples;
    std::vector<double> nominal, perturbed;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].row.branch != Branch::homological)
        continue;
      ++pt.homological;
      const Eigen::VectorXd a = embed_in_E(etas[i], pol.k_ctl);
      const Eigen::VectorXd b = embed_in_E(results[i].v_force, pol.k_ctl);
      nominal.insert(nominal.end(), a.data(), a.data() + a.size());
      perturbed.insert(perturbed.end(), b.data(), b.data() + b.size());
    }
    pt.excluded = pt.homological == 0;
    if (!pt.excluded)
      pt.ks = ks_two_sample(perturbed, nominal);
    report.points.push_back(pt);
  }
  std::vector<double> x, y;
  for (const MarginalLawPoint &pt : report.points)
    if (!pt.excluded && pt.ks > 0.0) {
      x.push_back(std::log(pt.delta));
      y.push_back(std::log(pt.ks));
    }
  if (x.size() >= 2) {
    const LineFit f = fit_line(x, y);
    report.exponent = f.slope;
    report.r2 = f.r2;
    report.fitted = true;
  }
  return report;
}

struct CouplingEnsembleReport {
  std::vector<CouplingRecord> records;
  std::vector<double> median_delta; // k = 0..horizon
  ExpFit fit;                       // on median_delta above the coalescence tolerance
};

/*
 * `runs` coupled pairs: u0 is absorbed state r, v0 = u0 + initial_distance
 * times a random unit profile. Run r continues the burn-in noise trajectory,
 * so its u path is that trajectory's plain forward simulation. After a run
 * coalesces, its last distance is carried forward.
 */
inline CouplingEnsembleReport coupling_ensemble(const Experiment &ex, int runs,
                                                double initial_distance, int horizon,
                                                CouplingPolicy policy, int burn_in) {
  policy.workers = 1;
  CouplingEnsembleReport report;
  report.records.resize(static_cast<std::size_t>(runs));
  parallel_for(report.records.size(), ex.workers, [&](std::size_t r) {
    const CouplingSample s = coupling_sample(ex, r, initial_distance, burn_in);
    report.records[r] = run_coupling(s.u, s.v, ex.layout, policy, ex.map, ex.seed,
                                     burn_in_trajectory(r), horizon, false,
                                     static_cast<std::uint64_t>(burn_in))
                            .record;
  });
  std::vector<double> t, d;
  for (int k = 0; k <= horizon; ++k) {
    std::vector<double> at_k;
    for (const CouplingRecord &rec : report.records) {
      if (k == 0)
        at_k.push_back(rec.initial_delta);
      else if (rec.rows.empty())
        at_k.push_back(rec.initial_delta);
      else
        at_k.push_back(rec.rows[std::min<std::size_t>(static_cast<std::size_t>(k), rec.rows.size()) - 1].delta);
    }
    report.median_delta.push_back(median(at_k));
    t.push_back(k);
  }
  report.fit = fit_exponential(t, report.median_delta, policy.coalesce_tol);
  return report;
}

} // namespace redmix

#endif // REDMIX_DIAGNOSTICS_HPP_
