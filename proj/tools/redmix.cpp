// redmix command-line driver.
//
//   redmix <command> [--config FILE] [--workers N] [key=value ...]
//
// Exit status: 0 success, 2 configuration error, 3 numerical failure.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "redmix/config.hpp"
#include "redmix/coupling.hpp"
#include "redmix/csv.hpp"
#include "redmix/diagnostics.hpp"
#include "redmix/noise_check.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace redmix;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

struct Context {
  RunConfig config;
  unsigned workers = 1;
  fs::path out;

  std::ofstream open(const std::string &name) const {
    std::ofstream f(out / name, std::ios::binary);
    if (!f)
      throw ConfigError("cannot write " + (out / name).string());
    return f;
  }
  void write_json(const std::string &name, const json &j) const {
    open(name) << j.dump(2) << '\n';
  }
};

// Reals in JSON reports keep full precision; non-finite values become null.
json real(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

SpectralState initial_state(const RunConfig &c) {
  Rng rng = make_stream(c.seed, 0, 0, StreamTag::initial);
  return c.init_norm * random_profile(c.cgl.n_modes, rng);
}

void cmd_simulate(const Context &ctx) {
  const RunConfig &c = ctx.config;
  const ShiftMap map(c.cgl);
  const auto states = simulate(initial_state(c), c.layout(), map, c.seed, 0, c.sim_horizon);
  std::vector<std::string> header{"t", "norm"};
  for (int k : c.dump_modes) {
    header.push_back("re_u_" + std::to_string(k));
    header.push_back("im_u_" + std::to_string(k));
  }
  std::ofstream f = ctx.open("trajectory.csv");
  CsvWriter csv(f, header);
  for (std::size_t t = 0; t < states.size(); ++t) {
    csv.field(static_cast<int>(t)).field(norm_H(states[t]));
    for (int k : c.dump_modes)
      csv.field(states[t][k].real()).field(states[t][k].imag());
    csv.end_row();
  }
}

void cmd_couple(const Context &ctx) {
  const RunConfig &c = ctx.config;
  const ShiftMap map(c.cgl);
  const SpectralState u0 = initial_state(c);
  Rng rng = make_stream(c.seed, 0, 0, StreamTag::direction);
  const SpectralState v0 = u0 + c.initial_distance * random_profile(c.cgl.n_modes, rng);
  const CouplingRun run = run_coupling(u0, v0, c.layout(), c.policy(ctx.workers), map, c.seed, 0,
                                       c.coupling.max_steps);
  std::ofstream f = ctx.open("coupling.csv");
  CsvWriter csv(f, {"k", "branch", "delta", "residual", "phi_norm", "guard_violation"});
  csv.field(0).field("initial").field(run.record.initial_delta).field(std::optional<double>{})
      .field(std::optional<double>{}).field(false);
  csv.end_row();
  json counts = {{"independent", 0}, {"homological", 0}, {"trivial", 0}};
  for (const CouplingRow &r : run.record.rows) {
    csv.field(r.step).field(std::string(branch_name(r.branch))).field(r.delta).field(r.residual)
        .field(r.phi_norm).field(r.guard_violation);
    csv.end_row();
    counts[std::string(branch_name(r.branch))] = counts[std::string(branch_name(r.branch))].get<int>() + 1;
  }
  ctx.write_json("coupling.json",
                 {{"initial_delta", real(run.record.initial_delta)},
                  {"final_delta", real(run.record.rows.empty() ? run.record.initial_delta
                                                               : run.record.rows.back().delta)},
                  {"steps", run.record.rows.size()},
                  {"coalesced", run.record.coalesced},
                  {"branches", counts}});
}

void cmd_mixing(const Context &ctx) {
  const RunConfig &c = ctx.config;
  const Experiment ex = c.experiment(ctx.workers);
  const double radius = pilot_radius(ex, 20, 2 * c.horizon);
  const double sep = c.separation > 0.0 ? c.separation : radius;
  Rng rng = make_stream(c.seed, 0, 0, StreamTag::initial);
  const SpectralState d = random_profile(c.cgl.n_modes, rng);
  const SpectralState u01 = (0.5 * sep) * d;
  const SpectralState u02 = (-0.5 * sep) * d;
  std::vector<Observable> obs;
  for (const std::string &name : c.observables)
    obs.push_back(parse_observable(name, c.cgl.n_modes));
  const MixRateReport mix = mixing_distance(ex, u01, u02, c.ensemble, c.horizon, obs);

  std::vector<std::string> header{"t", "distance", "noise_floor"};
  header.insert(header.end(), mix.observables.begin(), mix.observables.end());
  {
    std::ofstream f = ctx.open("mixing.csv");
    CsvWriter csv(f, header);
    for (std::size_t t = 0; t < mix.times.size(); ++t) {
      csv.field(mix.times[t]).field(mix.max_distance[t]).field(mix.noise_floor[t]);
      for (const auto &series : mix.distances)
        csv.field(series[t]);
      csv.end_row();
    }
  }

  const MarginalLawReport law =
      marginal_law_distance(ex, c.delta_grid, c.ensemble, c.policy(), c.burn_in);
  {
    std::ofstream f = ctx.open("marginal_law.csv");
    CsvWriter csv(f, {"delta", "ks", "samples", "homological", "excluded"});
    for (const MarginalLawPoint &p : law.points) {
      csv.field(p.delta).field(p.ks).field(p.samples).field(p.homological).field(p.excluded);
      csv.end_row();
    }
  }

  const bool rate_ok = mix.fit.conclusive && mix.fit.r2 >= 0.5;
  const double final_distance = mix.max_distance.back();
  ctx.write_json(
      "mixing.json",
      {{"ensemble", mix.ensemble},
       {"horizon", c.horizon},
       {"separation", real(sep)},
       {"absorbing_radius_estimate", real(radius)},
       {"noise_floor", real(mix.floor_level)},
       {"final_distance", real(final_distance)},
       {"below_twice_floor", final_distance < 2.0 * mix.floor_level},
       {"rate", rate_ok ? real(mix.fit.rate) : json(nullptr)},
       {"r2", real(mix.fit.r2)},
       {"fit_points", mix.fit.points},
       {"inconclusive", !rate_ok},
       {"marginal_law", {{"exponent", law.fitted ? real(law.exponent) : json(nullptr)},
                         {"r2", real(law.r2)},
                         {"fitted", law.fitted}}}});
}

void cmd_noise_check(const Context &ctx) {
  const RunConfig &c = ctx.config;
  const RedNoiseLaw law = c.law();
  const double ortho = haar_orthonormality_error(c.noise_K);
  const BoundednessReport bound = check_boundedness(law, c.check_paths, c.seed, ctx.workers);
  const DonskerReport donsker =
      check_donsker(law, c.donsker_n, c.donsker_samples, c.seed, ctx.workers);
  {
    Rng rng = make_stream(c.seed, 0, 0, StreamTag::drive);
    const HaarNoisePath path = sample_path(law, rng);
    const double w = path_cell_width(law.max_level);
    std::ofstream f = ctx.open("noise_path.csv");
    CsvWriter csv(f, {"t", "value"});
    for (int j = 0; j < (2 << law.max_level); ++j) {
      csv.field(j * w).field(eval_path(path, j * w));
      csv.end_row();
    }
  }
  ctx.write_json("noise_check.json",
                 {{"orthonormality", {{"max_level", c.noise_K},
                                      {"max_error", real(ortho)},
                                      {"pass", ortho <= 1e-12}}},
                  {"boundedness", {{"paths", bound.paths},
                                   {"bound", real(bound.bound)},
                                   {"max_abs", real(bound.max_abs)},
                                   {"violations", bound.violations},
                                   {"pass", bound.violations == 0}}},
                  {"donsker", {{"n", donsker.n},
                               {"samples", donsker.samples},
                               {"scale", real(donsker.scale)},
                               {"ks", real(donsker.ks)},
                               {"pass", donsker.ks <= 0.03}}},
                  {"truncation_bound", real(law.truncation_bound())}});
}

void cmd_hypotheses(const Context &ctx) {
  const RunConfig &c = ctx.config;
  const Experiment ex = c.experiment(ctx.workers);
  json summary;

  const AbsorbingReport h1 = verify_absorbing(ex, 11, 10, 2 * c.horizon);
  {
    std::ofstream f = ctx.open("h1.csv");
    CsvWriter csv(f, {"initial_norm", "radius", "entry_time", "h1_sup"});
    for (const AbsorbingLevel &l : h1.levels) {
      csv.field(l.initial_norm).field(l.radius).field(l.entry_time).field(l.h1_sup);
      csv.end_row();
    }
  }
  summary["h1"] = {{"radius", real(h1.radius)},   {"spread", real(h1.spread)},
                   {"trajectories", h1.trajectories}, {"failed", h1.failed},
                   {"failure", h1.failure},          {"pass", !h1.failed && h1.spread <= 0.1}};

  std::vector<SpectralState> small, large;
  for (int i = 0; i < 8; ++i) {
    Rng rng = make_stream(c.seed, static_cast<std::uint64_t>(i), 1, StreamTag::initial);
    small.push_back(1e-3 * random_profile(c.cgl.n_modes, rng));
    large.push_back(std::max(1.0, 2.0 * h1.radius) * random_profile(c.cgl.n_modes, rng));
  }
  const ZeroStabilityReport h2s = verify_zero_stability(ex.map, small, 2 * c.horizon, ctx.workers);
  const ZeroStabilityReport h2l = verify_zero_stability(ex.map, large, 2 * c.horizon, ctx.workers);
  {
    std::ofstream f = ctx.open("h2.csv");
    CsvWriter csv(f, {"initial_norm", "rate", "monotone"});
    for (const auto *r : {&h2s, &h2l})
      for (const DecaySample &s : r->samples) {
        csv.field(s.initial_norm).field(s.rate).field(s.monotone);
        csv.end_row();
      }
  }
  const double expected = h2s.expected_rate;
  bool small_ok = true;
  for (const DecaySample &s : h2s.samples)
    small_ok = small_ok && std::abs(s.rate - expected) <= 0.1 * std::abs(expected);
  summary["h2"] = {{"expected_rate", real(expected)},
                   {"small_median_rate", real(h2s.median_rate)},
                   {"small_min_rate", real(h2s.min_rate)},
                   {"large_median_rate", real(h2l.median_rate)},
                   {"large_monotone", h2l.monotone},
                   {"pass", small_ok && h2s.monotone && h2l.monotone}};

  const RankScanReport h3 = h3_rank_scan(ex, c.h3_samples, c.h3_k_ctl, c.n_resolved, c.burn_in);
  {
    std::ofstream f = ctx.open("h3.csv");
    CsvWriter csv(f, {"sample", "index", "singular_value", "rank", "full_rank"});
    for (std::size_t s = 0; s < h3.samples.size(); ++s) {
      const RankSample &r = h3.samples[s];
      for (Eigen::Index i = 0; i < r.singular_values.size(); ++i) {
        csv.field(static_cast<int>(s)).field(static_cast<int>(i)).field(r.singular_values[i])
            .field(r.rank).field(r.full);
        csv.end_row();
      }
    }
  }
  summary["h3"] = {{"rows", h3.rows},
                   {"cols", h3.cols},
                   {"threshold", real(h3.threshold)},
                   {"full_rank_fraction", real(h3.full_fraction)}};
  ctx.write_json("hypotheses.json", summary);
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

int run(const std::string &command, const std::optional<fs::path> &config_path,
        std::vector<std::string> overrides, unsigned workers) {
  overrides.push_back("command=" + command);
  if (const char *env = std::getenv("REDMIX_OUT"); env && *env)
    overrides.push_back(std::string("out_dir=") + json(std::string(env)).dump());
  Context ctx;
  ctx.config = load_config(config_path, overrides);
  ctx.workers = workers;
  ctx.out = ctx.config.out_dir;
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec)
    throw ConfigError("cannot create output directory " + ctx.out.string() + ": " + ec.message());
  ctx.write_json("resolved_config.json", to_json(ctx.config));
  ctx.write_json("metadata.json", {{"started", timestamp()}, {"workers", workers}});

  if (command == "simulate")
    cmd_simulate(ctx);
  else if (command == "couple")
    cmd_couple(ctx);
  else if (command == "mixing")
    cmd_mixing(ctx);
  else if (command == "noise-check")
    cmd_noise_check(ctx);
  else if (command == "hypotheses")
    cmd_hypotheses(ctx);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Coupling and mixing experiments for the randomly forced CGL equation"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  unsigned workers = 1;
  std::string chosen;
  for (const char *name : {"simulate", "couple", "mixing", "noise-check", "hypotheses"}) {
    CLI::App *sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--workers", workers, "parallel worker threads")->check(CLI::PositiveNumber);
    sub->add_option("overrides", overrides, "key=value settings applied after the file");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return exit_config;
  }

  try {
    std::optional<fs::path> path;
    if (config_path)
      path = fs::path(*config_path);
    return run(chosen, path, overrides, workers);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::invalid_argument &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::out_of_range &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  }
}
