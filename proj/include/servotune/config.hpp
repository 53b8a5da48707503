#ifndef SERVOTUNE_CONFIG_HPP
#define SERVOTUNE_CONFIG_HPP

// Flat key = value run configuration, named presets and the hash that keys
// cached grid tables and run records.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "servotune/experiment.hpp"
#include "servotune/tuner.hpp"

namespace servotune {

struct RunConfig {
  std::string plant_preset = "paper-table1";
  std::string weight_preset = "paper-table2-sim";
  std::string set_preset = "desk-sim";
  Experiment experiment{};
  FeasibleSet set = feasible_set_preset("desk-sim");
  BoConfig bo{};
  std::uint64_t seed = 0;
  std::string out_dir = "servotune-out";
  int threads = 1;

  /// Applies one key; throws ConfigError for unknown keys or bad values.
  void set_value(const std::string& key, const std::string& value);
  void validate() const;

  /// Every effective setting except output location and thread count, one
  /// `key = value` line each, sorted by key.
  std::map<std::string, std::string> entries() const;
  std::string canonical() const;
  /// Hash of everything that affects the metric table (plant, current loop,
  /// trajectory, simulator, metric options, feasible set).
  std::string table_hash() const;
  std::string hash() const;
};

/// Reads `key = value` lines; `#` starts a comment. Keys are applied in
/// file order on top of `base`.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

PlantParams plant_preset(const std::string& name);

}  // namespace servotune

#endif  // SERVOTUNE_CONFIG_HPP
