#ifndef SERVOTUNE_COMMANDS_HPP
#define SERVOTUNE_COMMANDS_HPP

// Subcommands of the servotune tool. Each writes its files into
// cfg.out_dir, a JSON run record among them, and returns the process exit
// code (0 ok, 1 divergence or tuning failure). Configuration problems throw
// ConfigError.

#include <iosfwd>
#include <string>
#include <vector>

#include "servotune/config.hpp"

namespace servotune {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// "a,b,c" -> gains (third value is Ki or Tn per the feasible set). Throws
/// ConfigError unless the gains are positive and inside the set.
GainVector parse_gains(const std::string& text, const FeasibleSet& set);

int cmd_simulate(const RunConfig& cfg, const GainVector& gains, std::ostream& log);
int cmd_tune(const RunConfig& cfg, std::ostream& log);
/// Exhaustive grid, cached under `cache_dir` (default out_dir/cache) by the
/// table hash.
int cmd_grid(const RunConfig& cfg, const std::string& cache_dir, std::ostream& log);
int cmd_compare(const RunConfig& cfg, const std::string& cache_dir, std::ostream& log);
int cmd_sweep_m0(const RunConfig& cfg, const std::vector<int>& m0s, int repeats,
                 const std::string& cache_dir, std::ostream& log);

/// Loads the cached metric table or evaluates and stores it.
MetricTable cached_grid(const RunConfig& cfg, const std::string& cache_dir, std::ostream& log);

}  // namespace servotune

#endif  // SERVOTUNE_COMMANDS_HPP
