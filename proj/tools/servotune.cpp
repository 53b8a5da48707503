// servotune: simulate, tune and benchmark the cascade controller of the
// ball-screw axis.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "servotune/commands.hpp"
#include "servotune/errors.hpp"

using namespace servotune;

namespace {

struct Options {
  std::string config_path;
  std::string preset;
  std::string weights;
  std::string set;
  std::string out;
  std::string cache;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> m0;
  std::optional<double> beta;
  std::optional<int> max_iters;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "key = value configuration file");
  cmd->add_option("--preset", o.preset, "plant preset (paper-table1)");
  cmd->add_option("--weights", o.weights, "weight preset (paper-table2-sim, paper-table-exp)");
  cmd->add_option("--set", o.set, "feasible set (desk-sim, paper-sim, paper-sim-full, paper-exp)");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--m0", o.m0, "initial design size");
  cmd->add_option("--beta", o.beta, "LCB confidence multiplier");
  cmd->add_option("--max-iters", o.max_iters, "BO iterations after the initial design");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--threads", o.threads, "worker threads for grid evaluation");
  cmd->add_option("-D,--define", o.overrides, "extra key=value setting (repeatable)");
}

RunConfig build_config(const Options& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path, cfg);
  if (!o.preset.empty()) cfg.set_value("plant", o.preset);
  if (!o.weights.empty()) cfg.set_value("weights", o.weights);
  if (!o.set.empty()) cfg.set_value("set", o.set);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + kv + "'");
    cfg.set_value(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.m0) cfg.bo.m0 = *o.m0;
  if (o.beta) cfg.bo.beta = *o.beta;
  if (o.max_iters) cfg.bo.max_iterations = *o.max_iters;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.out.empty()) cfg.out_dir = o.out;
  cfg.validate();
  return cfg;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  for (std::string c; std::getline(ss, c, ',');) {
    try {
      size_t used = 0;
      v.push_back(std::stoi(c, &used));
      if (used != c.size()) throw std::invalid_argument(c);
    } catch (const std::exception&) {
      throw ConfigError("malformed integer list '" + s + "'");
    }
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascade-controller simulation and Bayesian-optimization tuning"};
  app.require_subcommand(1);
  Options o;
  std::string gains;
  std::string m0_list = "5,20,50";
  int repeats = 20;

  CLI::App* sim = app.add_subcommand("simulate", "run one closed-loop experiment");
  add_common(sim, o);
  sim->add_option("--gains", gains, "Kp,Kv,Ki")->required();
  CLI::App* tune = app.add_subcommand("tune", "Bayesian-optimization tuning against the simulator");
  add_common(tune, o);
  CLI::App* grid = app.add_subcommand("grid", "exhaustive grid search (cached)");
  add_common(grid, o);
  grid->add_option("--cache", o.cache, "grid cache directory");
  CLI::App* cmp = app.add_subcommand("compare", "grid, Ziegler-Nichols, ITAE, relay and BO side by side");
  add_common(cmp, o);
  cmp->add_option("--cache", o.cache, "grid cache directory");
  CLI::App* sweep = app.add_subcommand("sweep-m0", "repeated BO runs for several initial design sizes");
  add_common(sweep, o);
  sweep->add_option("--cache", o.cache, "grid cache directory");
  sweep->add_option("--m0-list", m0_list, "comma-separated initial design sizes");
  sweep->add_option("--repeats", repeats, "seeded runs per m0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const RunConfig cfg = build_config(o);
    if (sim->parsed()) return cmd_simulate(cfg, parse_gains(gains, cfg.set), std::cout);
    if (tune->parsed()) return cmd_tune(cfg, std::cout);
    if (grid->parsed()) return cmd_grid(cfg, o.cache, std::cout);
    if (cmp->parsed()) return cmd_compare(cfg, o.cache, std::cout);
    if (sweep->parsed()) return cmd_sweep_m0(cfg, parse_int_list(m0_list), repeats, o.cache, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
