#ifndef REDMIX_CONFIG_HPP_
#define REDMIX_CONFIG_HPP_

/*
 * Run configuration. The file is JSON; nested objects are flattened to
 * dotted keys ({"cgl": {"p": 1}} is the same as {"cgl.p": 1}). Overrides
 * "key=value" are applied afterwards, with value parsed as JSON and taken
 * as a plain string when it does not parse.
 */

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "redmix/cgl.hpp"
#include "redmix/coupling.hpp"
#include "redmix/diagnostics.hpp"
#include "redmix/errors.hpp"
#include "redmix/noise.hpp"

namespace redmix {

struct RunConfig {
  std::string command;
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  int noise_K = 6;
  double noise_q = 2.0;
  double noise_c0 = 1.0;
  std::string noise_density = "uniform";
  std::vector<int> force_modes{-3, -2, -1, 0, 1, 2, 3};
  std::vector<double> force_amplitudes{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};

  CglParams cgl;
  int k_ctl = 0;
  int n_resolved = 16;

  CouplingPolicy coupling;
  double initial_distance = 5e-3;

  int ensemble = 200;
  int horizon = 50;
  std::vector<std::string> observables = default_observable_names();
  std::vector<double> delta_grid{1e-2, 1e-3, 1e-4};
  int burn_in = 20;
  double separation = 0.0; // 0: use the measured absorbing radius
  int h3_samples = 20;
  int h3_k_ctl = 2;

  int sim_horizon = 10;
  std::vector<int> dump_modes{0, 1, -1};
  double init_norm = 0.0;

  int check_paths = 10000;
  int donsker_n = 4096;
  int donsker_samples = 5000;

  RedNoiseLaw law() const {
    return RedNoiseLaw::saturated(noise_K, noise_c0, noise_q,
                                  NoiseDensity::from_name(noise_density));
  }
  ForceLayout layout() const { return {force_modes, force_amplitudes, law()}; }
  CouplingPolicy policy(unsigned workers = 1) const {
    CouplingPolicy p = coupling;
    p.k_ctl = k_ctl;
    p.n_resolved = n_resolved;
    p.workers = workers;
    return p;
  }
  Experiment experiment(unsigned workers = 1) const {
    return {ShiftMap(cgl), layout(), seed, workers};
  }

  void validate() const;
};

namespace config_detail {

using nlohmann::json;

inline void read(const json &v, const std::string &key, double &out) {
  if (!v.is_number())
    throw ConfigError(key + ": expected a number");
  out = v.get<double>();
}
inline void read(const json &v, const std::string &key, int &out) {
  if (!v.is_number_integer())
    throw ConfigError(key + ": expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < INT32_MIN || x > INT32_MAX)
    throw ConfigError(key + ": integer out of range");
  out = static_cast<int>(x);
}
inline void read(const json &v, const std::string &key, std::uint64_t &out) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(key + ": expected a nonnegative integer");
  out = v.get<std::uint64_t>();
}
inline void read(const json &v, const std::string &key, bool &out) {
  if (!v.is_boolean())
    throw ConfigError(key + ": expected true or false");
  out = v.get<bool>();
}
inline void read(const json &v, const std::string &key, std::string &out) {
  if (!v.is_string())
    throw ConfigError(key + ": expected a string");
  out = v.get<std::string>();
}
template <class T>
void read(const json &v, const std::string &key, std::vector<T> &out) {
  if (!v.is_array())
    throw ConfigError(key + ": expected a list");
  std::vector<T> tmp(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    read(v[i], key, tmp[i]);
  out = std::move(tmp);
}

template <class F> void for_each_key(RunConfig &c, F &&f) {
  f("command", c.command);
  f("out_dir", c.out_dir);
  f("seed", c.seed);
  f("noise.K", c.noise_K);
  f("noise.q", c.noise_q);
  f("noise.c0", c.noise_c0);
  f("noise.density", c.noise_density);
  f("force.modes", c.force_modes);
  f("force.amplitudes", c.force_amplitudes);
  f("cgl.epsilon", c.cgl.epsilon);
  f("cgl.gamma", c.cgl.gamma);
  f("cgl.p", c.cgl.p);
  f("cgl.mass_shift", c.cgl.mass_shift);
  f("cgl.nonlinear", c.cgl.nonlinear);
  f("grid.n_modes", c.cgl.n_modes);
  f("grid.dt_log2", c.cgl.dt_log2);
  f("linop.k_ctl", c.k_ctl);
  f("linop.n_resolved", c.n_resolved);
  f("coupling.delta0", c.coupling.delta0);
  f("coupling.rho_max", c.coupling.rho_max);
  f("coupling.lambda_reg", c.coupling.lambda_reg);
  f("coupling.xi_max", c.coupling.xi_max);
  f("coupling.max_steps", c.coupling.max_steps);
  f("coupling.coalesce_tol", c.coupling.coalesce_tol);
  f("coupling.initial_distance", c.initial_distance);
  f("diag.ensemble", c.ensemble);
  f("diag.horizon", c.horizon);
  f("diag.observables", c.observables);
  f("diag.delta_grid", c.delta_grid);
  f("diag.burn_in", c.burn_in);
  f("diag.separation", c.separation);
  f("diag.h3_samples", c.h3_samples);
  f("diag.h3_k_ctl", c.h3_k_ctl);
  f("sim.horizon", c.sim_horizon);
  f("sim.dump_modes", c.dump_modes);
  f("init.norm", c.init_norm);
  f("check.paths", c.check_paths);
  f("check.donsker_n", c.donsker_n);
  f("check.donsker_samples", c.donsker_samples);
}

inline void flatten(const json &j, const std::string &prefix, std::map<std::string, json> &out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out[key] = *it;
  }
}

} // namespace config_detail

/// Applies flat key/value pairs; unknown keys are rejected.
inline void apply_values(RunConfig &c, const std::map<std::string, nlohmann::json> &values) {
  for (const auto &[key, value] : values) {
    bool known = false;
    config_detail::for_each_key(c, [&](const std::string &k, auto &field) {
      if (k == key) {
        config_detail::read(value, key, field);
        known = true;
      }
    });
    if (!known)
      throw ConfigError("unknown config key '" + key + "'");
  }
}

inline void apply_json(RunConfig &c, const nlohmann::json &doc) {
  if (!doc.is_object())
    throw ConfigError("config must be a JSON object");
  std::map<std::string, nlohmann::json> flat;
  config_detail::flatten(doc, "", flat);
  apply_values(c, flat);
}

/// "key=value"; value is JSON when it parses, a string otherwise.
inline void apply_override(RunConfig &c, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded())
    value = text;
  apply_values(c, {{key, value}});
}

inline RunConfig load_config(const std::optional<std::filesystem::path> &path,
                             const std::vector<std::string> &overrides = {}) {
  RunConfig c;
  if (path) {
    std::ifstream in(*path);
    if (!in)
      throw ConfigError("cannot open config file '" + path->string() + "'");
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded())
      throw ConfigError("config file '" + path->string() + "' is not valid JSON");
    apply_json(c, doc);
  }
  for (const std::string &o : overrides)
    apply_override(c, o);
  c.validate();
  return c;
}

/// Every key with its resolved value, flat and sorted.
inline nlohmann::json to_json(const RunConfig &config) {
  RunConfig c = config;
  nlohmann::json out = nlohmann::json::object();
  config_detail::for_each_key(c, [&](const std::string &k, auto &field) { out[k] = field; });
  return out;
}

inline void RunConfig::validate() const {
  cgl.validate();
  const ForceLayout lay = layout();
  lay.validate();
  if (force_modes.empty())
    throw ConfigError("force.modes must name at least one mode");
  for (int m : force_modes)
    if (m <= -cgl.n_modes / 2 || m > cgl.n_modes / 2)
      throw ConfigError("forced mode " + std::to_string(m) + " lies outside the grid");
  check_forcing_resolved(noise_K, cgl);
  coupling.validate();
  if (k_ctl < 0 || k_ctl > noise_K)
    throw ConfigError("linop.k_ctl must lie in [0, noise.K]");
  if (h3_k_ctl < 0 || h3_k_ctl > noise_K)
    throw ConfigError("diag.h3_k_ctl must lie in [0, noise.K]");
  if (n_resolved < 1 || n_resolved > cgl.n_modes)
    throw ConfigError("linop.n_resolved must lie in [1, grid.n_modes]");
  if (!(initial_distance >= 0.0))
    throw ConfigError("coupling.initial_distance must be nonnegative");
  if (ensemble < 2)
    throw ConfigError("diag.ensemble must be at least 2");
  if (horizon < 2)
    throw ConfigError("diag.horizon must be at least 2");
  if (observables.empty())
    throw ConfigError("diag.observables must not be empty");
  for (const std::string &o : observables)
    parse_observable(o, cgl.n_modes);
  if (delta_grid.empty())
    throw ConfigError("diag.delta_grid must not be empty");
  for (double d : delta_grid)
    if (!(d > 0.0))
      throw ConfigError("diag.delta_grid entries must be positive");
  if (burn_in < 0 || h3_samples < 1 || sim_horizon < 0)
    throw ConfigError("diag.burn_in, diag.h3_samples and sim.horizon must be nonnegative counts");
  if (!(separation >= 0.0) || !(init_norm >= 0.0))
    throw ConfigError("diag.separation and init.norm must be nonnegative");
  for (int m : dump_modes)
    if (m <= -cgl.n_modes / 2 || m > cgl.n_modes / 2)
      throw ConfigError("sim.dump_modes entry " + std::to_string(m) + " lies outside the grid");
  if (check_paths < 1 || donsker_n < 1 || donsker_samples < 1)
    throw ConfigError("check.* counts must be positive");
}

} // namespace redmix

#endif // REDMIX_CONFIG_HPP_
