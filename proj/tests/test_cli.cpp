#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "servotune/commands.hpp"
#include "servotune/config.hpp"
#include "servotune/errors.hpp"

using namespace servotune;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("servotune-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig tiny_config(const fs::path& out) {
  std::istringstream in(
      "# small grid so every command finishes quickly\n"
      "set.kp.points = 3\n"
      "set.kv.points = 2\n"
      "set.i.points = 2\n"
      "bo.m0 = 4\n"
      "bo.max_iters = 3\n"
      "seed = 11\n");
  RunConfig cfg = parse_config(in);
  cfg.out_dir = out.string();
  cfg.validate();
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

nlohmann::json record(const fs::path& p) {
  nlohmann::json j = nlohmann::json::parse(slurp(p));
  j.erase("timestamp");
  return j;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SERVOTUNE_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, ParsesKeysAndComments) {
  std::istringstream in("plant = paper-table1  # preset\n\nbo.beta = 1.5\ntrajectory.position = 0.01\n");
  const RunConfig c = parse_config(in);
  EXPECT_DOUBLE_EQ(c.bo.beta, 1.5);
  EXPECT_DOUBLE_EQ(c.experiment.trajectory.position_setpoint, 0.01);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  RunConfig c;
  EXPECT_THROW(c.set_value("no.such.key", "1"), ConfigError);
  EXPECT_THROW(c.set_value("bo.beta", "abc"), ConfigError);
  EXPECT_THROW(c.set_value("plant", "unknown"), ConfigError);
  std::istringstream bad("bo.m0 = 1\n");
  EXPECT_THROW(parse_config(bad).validate(), ConfigError);
  std::istringstream noeq("bo.m0 20\n");
  EXPECT_THROW(parse_config(noeq), ConfigError);
}

TEST(Config, HashesTrackTheRightSettings) {
  RunConfig a, b;
  EXPECT_EQ(a.hash(), b.hash());
  b.set_value("bo.beta", "3");
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.table_hash(), b.table_hash());
  b.set_value("sim.substep", "5e-7");
  EXPECT_NE(a.table_hash(), b.table_hash());
  b = a;
  b.out_dir = "elsewhere";
  b.threads = 4;
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Commands, ParseGains) {
  const FeasibleSet s = feasible_set_preset("desk-sim");
  const GainVector g = parse_gains("150,0.35,90", s);
  EXPECT_DOUBLE_EQ(g.Kv, 0.35);
  EXPECT_THROW(parse_gains("0,0,0", s), ConfigError);
  EXPECT_THROW(parse_gains("1,2", s), ConfigError);
  EXPECT_THROW(parse_gains("5000,0.3,90", s), ConfigError);
}

TEST(Commands, RecordsAreReproducible) {
  struct Case {
    std::string name, record;
    std::vector<std::string> files;
  };
  const std::vector<Case> cases = {
      {"simulate", "simulate.json", {"trace.csv", "reference.csv"}},
      {"tune", "tune.json", {"tune_log.csv", "tune_convergence.csv", "tune_trace.csv"}},
      {"grid", "grid.json", {"grid_costs.csv"}},
      {"compare", "compare.json", {"compare.csv"}},
      {"sweep", "sweep_m0.json", {"sweep_m0.csv"}},
  };
  for (const Case& c : cases) {
    nlohmann::json first;
    std::vector<std::string> first_files;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = scratch_dir(c.name + std::to_string(rep));
      const RunConfig cfg = tiny_config(out);
      std::ostringstream log;
      int rc = -1;
      if (c.name == "simulate") rc = cmd_simulate(cfg, parse_gains("150,0.35,90", cfg.set), log);
      if (c.name == "tune") rc = cmd_tune(cfg, log);
      if (c.name == "grid") rc = cmd_grid(cfg, "", log);
      if (c.name == "compare") rc = cmd_compare(cfg, "", log);
      if (c.name == "sweep") rc = cmd_sweep_m0(cfg, {3, 4}, 2, "", log);
      ASSERT_EQ(rc, kExitOk) << c.name << '\n' << log.str();
      const nlohmann::json j = record(out / c.record);
      EXPECT_EQ(j.at("seed"), 11);
      EXPECT_EQ(j.at("config_hash"), cfg.hash());
      std::vector<std::string> files;
      for (const std::string& f : c.files) files.push_back(slurp(out / f));
      if (rep == 0) {
        first = j;
        first_files = files;
      } else {
        EXPECT_EQ(j, first) << c.name;
        EXPECT_EQ(files, first_files) << c.name;
      }
    }
  }
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch_dir("cli");
  const std::string tiny = " --out " + out.string() + " -D set.kp.points=3 -D set.kv.points=2 -D set.i.points=2";
  EXPECT_EQ(run_cli("simulate --gains 150,0.35,90" + tiny), 0);
  EXPECT_TRUE(fs::exists(out / "simulate.json"));
  EXPECT_EQ(run_cli("simulate --gains 0,0,0" + tiny), 2);
  EXPECT_EQ(run_cli("simulate" + tiny), 2);
  EXPECT_EQ(run_cli("tune --config /nonexistent/servotune.cfg" + tiny), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("tune --m0 1" + tiny), 2);
  EXPECT_EQ(run_cli("simulate --gains 150,0.35,90 -D sim.divergence_threshold=1e-12" + tiny), 1);
}
