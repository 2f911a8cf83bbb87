// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Pass criterion numbers as arguments to run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "redmix/config.hpp"
#include "redmix/coupling.hpp"
#include "redmix/diagnostics.hpp"
#include "redmix/noise_check.hpp"

using namespace redmix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

RunConfig defaults() { return RunConfig(); }

Outcome orthonormality() {
  const double e = haar_orthonormality_error(6);
  return {e <= 1e-12, fmt("max |<h_a,h_b> - delta_ab| = %.3g (bound 1e-12)", e)};
}

Outcome boundedness() {
  const RunConfig c = defaults();
  const BoundednessReport r = check_boundedness(c.law(), 10000, c.seed, workers());
  return {r.violations == 0 && r.paths == 10000,
          fmt("%d paths, sup %.4f vs bound %.4f, %d violations", r.paths, r.max_abs, r.bound,
              r.violations)};
}

Outcome donsker() {
  const RunConfig c = defaults();
  const DonskerReport r = check_donsker(c.law(), 4096, 5000, c.seed, workers());
  return {r.ks <= 0.03, fmt("KS = %.4f with N = 4096, 5000 samples (bound 0.03)", r.ks)};
}

Outcome tangent() {
  const RunConfig c = defaults();
  const ShiftMap map(c.cgl);
  const ForceLayout lay = c.layout();
  const double h = 1e-4;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng = make_stream(c.seed, s, 7, StreamTag::initial);
    const SpectralState u0 = 1.5 * random_profile(c.cgl.n_modes, rng);
    const ForceProfile eta = sample_force(lay, c.seed, s, 7);
    const ForceProfile xi = sample_force(lay, c.seed, s, 7, StreamTag::direction);
    const SpectralState fd =
        (0.5 / h) * (map.step(u0, axpy(h, xi, eta)) - map.step(u0, axpy(-h, xi, eta)));
    const SpectralState v = map.tangent(map.trajectory(u0, eta), xi);
    worst = std::max(worst, dist_H(v, fd) / norm_H(fd));
  }
  return {worst <= 1e-4, fmt("worst relative error %.3g over 20 triples (bound 1e-4)", worst)};
}

Outcome linear_oracle() {
  CglParams p;
  p.nonlinear = false;
  const int n_resolved = 16;
  const ShiftMap map(p);
  const std::vector<int> modes = resolved_modes(p.n_modes, n_resolved);
  const ForceLayout lay{modes, std::vector<double>(modes.size(), 0.5),
                        RedNoiseLaw::saturated(6, 1.0, 2.0)};
  CouplingPolicy pol;
  pol.lambda_reg = 0.0;
  pol.n_resolved = n_resolved;
  const double delta = 1e-3;
  double worst = 0.0;
  int homological = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng = make_stream(3, s, 0, StreamTag::initial);
    const SpectralState u = random_profile(p.n_modes, rng);
    std::normal_distribution<double> g;
    SpectralState d(p.n_modes);
    for (int k : modes)
      d[k] = Complex(g(rng), g(rng));
    const SpectralState v = u + (delta / norm_H(d)) * d;
    const ForceProfile eta = sample_force(lay, 3, s, 0);
    const CoupleStepResult r = couple_step(u, v, eta, [&] { return eta; }, pol, map);
    if (r.row.branch == Branch::homological)
      ++homological;
    worst = std::max(worst, r.row.delta / delta);
  }
  return {homological == 20 && worst <= 1e-8,
          fmt("%d/20 homological, worst |u1-v1|/delta = %.3g (bound 1e-8)", homological, worst)};
}

Outcome contraction() {
  const RunConfig c = defaults();
  const ContractionReport r =
      contraction_study(c.experiment(workers()), 1e-3, 200, 2000, c.policy(), c.burn_in);
  return {r.homological == 200 && r.fraction >= 0.7,
          fmt("%d/%d homological steps contracted by 1/2 (%.1f%%, need 70%%), %d attempts, "
              "median ratio %.3g",
              r.contracted, r.homological, 100.0 * r.fraction, r.attempts,
              r.ratios.empty() ? 0.0 : median(r.ratios))};
}

Outcome coupling_convergence() {
  const RunConfig c = defaults();
  CouplingPolicy pol = c.policy();
  const CouplingEnsembleReport r = coupling_ensemble(c.experiment(workers()), 50,
                                                     0.5 * pol.delta0, 100, pol, c.burn_in);
  int coalesced = 0;
  for (const CouplingRecord &rec : r.records)
    coalesced += rec.coalesced ? 1 : 0;
  return {r.fit.conclusive && r.fit.rate < 0.0 && r.fit.r2 >= 0.8,
          fmt("median rate %.4f, R^2 %.3f on %d points (need rate < 0, R^2 >= 0.8), "
              "%d/50 coalesced",
              r.fit.rate, r.fit.r2, r.fit.points, coalesced)};
}

Outcome mixing() {
  const RunConfig c = defaults();
  const Experiment ex = c.experiment(workers());
  const double radius = pilot_radius(ex, 20, 2 * c.horizon);
  Rng rng = make_stream(c.seed, 0, 0, StreamTag::initial);
  const SpectralState d = random_profile(c.cgl.n_modes, rng);
  std::vector<Observable> obs;
  for (const std::string &n : c.observables)
    obs.push_back(parse_observable(n, c.cgl.n_modes));
  const MixRateReport r =
      mixing_distance(ex, (0.5 * radius) * d, (-0.5 * radius) * d, 200, 50, obs);
  const double last = r.max_distance.back();
  const bool below = last < 2.0 * r.floor_level;
  const bool rate = r.fit.conclusive && r.fit.rate < 0.0 && r.fit.r2 >= 0.5;
  return {below && rate,
          fmt("separation %.3f, distance at t=50 %.4f vs 2x floor %.4f; rate %.4f, R^2 %.3f "
              "on %d points",
              radius, last, 2.0 * r.floor_level, r.fit.rate, r.fit.r2, r.fit.points)};
}

Outcome zero_stability() {
  const RunConfig c = defaults();
  const ShiftMap map(c.cgl);
  std::vector<SpectralState> small;
  for (std::uint64_t i = 0; i < 8; ++i) {
    Rng rng = make_stream(c.seed, i, 1, StreamTag::initial);
    small.push_back(1e-3 * random_profile(c.cgl.n_modes, rng));
  }
  const ZeroStabilityReport r = verify_zero_stability(map, small, 100, workers());
  double worst_small = 0.0;
  for (const DecaySample &s : r.samples)
    worst_small = std::max(worst_small, std::abs(s.rate / r.expected_rate - 1.0));

  CglParams lin = c.cgl;
  lin.nonlinear = false;
  const ShiftMap lmap(lin);
  std::vector<SpectralState> single;
  const std::vector<int> ks{0, 1, -2, 5, -9};
  for (int k : ks) {
    SpectralState u(lin.n_modes);
    u[k] = Complex(0.6, -0.8);
    single.push_back(u);
  }
  const ZeroStabilityReport l = verify_zero_stability(lmap, single, 8, 1);
  double worst_exact = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i)
    worst_exact = std::max(worst_exact, std::abs(l.samples[i].rate / -lin.lambda(ks[i]) - 1.0));
  return {worst_small <= 0.1 && worst_exact <= 1e-12,
          fmt("small data worst |rate/(-eps m0) - 1| = %.4f (bound 0.1); B off worst relative "
              "error %.2g vs -lambda_k (bound 1e-12)",
              worst_small, worst_exact)};
}

Outcome marginal_law() {
  const RunConfig c = defaults();
  const std::vector<double> deltas{1e-2, 1e-3, 1e-4};
  const MarginalLawReport r =
      marginal_law_distance(c.experiment(workers()), deltas, 200, c.policy(), c.burn_in);
  bool decreasing = r.points.size() == 3;
  std::string ks;
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const MarginalLawPoint &p = r.points[i];
    decreasing = decreasing && !p.excluded && (i == 0 || p.ks < r.points[i - 1].ks);
    ks += fmt("%s%.3g (%d homological)", i ? ", " : "", p.ks, p.homological);
  }
  return {decreasing && r.fitted && r.exponent > 0.0,
          fmt("KS = %s; exponent a = %.3f", ks.c_str(), r.exponent)};
}

// --- reproducibility through the command-line tool ---------------------------

int run_cli(const std::string &args) {
  const std::string cmd = "\"" REDMIX_CLI "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::pair<std::string, std::string>> csv_files(const fs::path &dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv")
      out.emplace_back(e.path().filename().string(), slurp(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

Outcome reproducibility() {
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "sim.horizon=5 init.norm=1"},
      {"couple", "init.norm=1 coupling.max_steps=5"},
      {"mixing", "diag.ensemble=6 diag.horizon=4 diag.delta_grid=[1e-2,1e-3] diag.burn_in=3"},
      {"noise-check", "check.paths=200 check.donsker_n=64 check.donsker_samples=200"},
      {"hypotheses", "diag.horizon=4 diag.h3_samples=2 diag.burn_in=3"},
  };
  const fs::path root = fs::temp_directory_path() / "redmix_acceptance";
  fs::remove_all(root);
  bool ok = true;
  std::string detail;
  for (const auto &[cmd, args] : commands) {
    std::vector<std::vector<std::pair<std::string, std::string>>> runs;
    for (const char *w : {"1", "3", "1"}) {
      const fs::path dir = root / (cmd + "_" + std::to_string(runs.size()));
      const int code = run_cli(cmd + " --workers " + w + " " + args + " out_dir=" + dir.string());
      if (code != 0) {
        ok = false;
        detail += cmd + " exited " + std::to_string(code) + "; ";
        break;
      }
      runs.push_back(csv_files(dir));
    }
    if (runs.size() != 3)
      continue;
    const bool same = !runs[0].empty() && runs[0] == runs[1] && runs[0] == runs[2];
    ok = ok && same;
    detail += fmt("%s %zu csv %s; ", cmd.c_str(), runs[0].size(), same ? "identical" : "DIFFER");
  }
  fs::remove_all(root);
  return {ok, detail + "workers 1, 3 and a re-run"};
}

} // namespace

int main(int argc, char **argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"haar orthonormality", orthonormality},
      {"noise boundedness", boundedness},
      {"donsker", donsker},
      {"tangent consistency", tangent},
      {"linear oracle coalescence", linear_oracle},
      {"contraction frequency", contraction},
      {"coupling convergence", coupling_convergence},
      {"mixing", mixing},
      {"zero stability", zero_stability},
      {"marginal-law proximity", marginal_law},
      {"reproducibility", reproducibility},
  };
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i)
    chosen.insert(std::atoi(argv[i]));
  std::printf("acceptance: %u worker thread(s)\n", workers());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!chosen.empty() && !chosen.count(id))
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %-26s %s  %s  [%.1f s]\n", id, criteria[i].first.c_str(),
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
