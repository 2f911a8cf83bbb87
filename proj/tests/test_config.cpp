#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "redmix/config.hpp"

using namespace redmix;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string &name, const std::string &text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

} // namespace

TEST(Config, DefaultsValidate) {
  const RunConfig c = load_config(std::nullopt);
  EXPECT_EQ(c.cgl.dt_log2, 9);
  EXPECT_EQ(c.noise_K, 6);
  EXPECT_EQ(c.layout().modes.size(), 7u);
  EXPECT_EQ(c.policy(3).workers, 3u);
  EXPECT_EQ(c.experiment(2).n_modes(), 64);
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.seed = 99;
  c.cgl.epsilon = 0.25;
  c.delta_grid = {1e-1, 1e-5};
  c.observables = {"re:2"};
  const nlohmann::json j = to_json(c);
  EXPECT_EQ(j.at("seed"), 99);
  EXPECT_EQ(j.at("cgl.epsilon"), 0.25);
  RunConfig d;
  apply_json(d, j);
  EXPECT_EQ(to_json(d), j);
}

TEST(Config, NestedObjectsFlatten) {
  RunConfig c;
  apply_json(c, nlohmann::json::parse(R"({"cgl": {"p": 2, "gamma": 0.5}, "grid.n_modes": 32})"));
  EXPECT_EQ(c.cgl.p, 2);
  EXPECT_EQ(c.cgl.gamma, 0.5);
  EXPECT_EQ(c.cgl.n_modes, 32);
}

TEST(Config, UnknownKeyOrWrongTypeIsRejected) {
  RunConfig c;
  EXPECT_THROW(apply_json(c, nlohmann::json::parse(R"({"cgl": {"pp": 2}})")), ConfigError);
  EXPECT_THROW(apply_override(c, "cgl.p=\"two\""), ConfigError);
  EXPECT_THROW(apply_override(c, "cgl.p=1.5"), ConfigError);
  EXPECT_THROW(apply_override(c, "force.modes=[1,\"a\"]"), ConfigError);
  EXPECT_THROW(apply_override(c, "novalue"), ConfigError);
  EXPECT_THROW(apply_json(c, nlohmann::json::array()), ConfigError);
}

TEST(Config, OverrideParsing) {
  RunConfig c;
  apply_override(c, "seed=7");
  apply_override(c, "noise.density=triangular");
  apply_override(c, "force.modes=[0,1]");
  apply_override(c, "force.amplitudes=[1,0.25]");
  apply_override(c, "cgl.nonlinear=false");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.noise_density, "triangular");
  EXPECT_EQ(c.force_modes, (std::vector<int>{0, 1}));
  EXPECT_EQ(c.force_amplitudes, (std::vector<double>{1.0, 0.25}));
  EXPECT_FALSE(c.cgl.nonlinear);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ValidationCatchesInconsistentSettings) {
  EXPECT_THROW(load_config(std::nullopt, {"grid.dt_log2=6"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"linop.k_ctl=7"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"force.modes=[40]", "force.amplitudes=[1]"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"force.amplitudes=[1]"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"diag.observables=[\"re:99\"]"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"noise.density=cauchy"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"coupling.rho_max=2"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"diag.delta_grid=[]"}), ConfigError);
}

TEST(Config, FilesAreReadAndOverridden) {
  const fs::path p = write_temp("redmix_cfg_test.json", R"({"seed": 3, "diag": {"horizon": 8}})");
  const RunConfig c = load_config(p, {"diag.horizon=9"});
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.horizon, 9);
  fs::remove(p);
  EXPECT_THROW(load_config(fs::path("/nonexistent/redmix.json")), ConfigError);
  const fs::path bad = write_temp("redmix_cfg_bad.json", "{ not json");
  EXPECT_THROW(load_config(bad), ConfigError);
  fs::remove(bad);
}
