#ifndef SERVOTUNE_EXPERIMENT_HPP
#define SERVOTUNE_EXPERIMENT_HPP

// Simulator + metrics + weights bundled into a cost oracle, and the
// per-grid-point metric table shared by grid search and ITAE tuning.

#include <iosfwd>
#include <vector>

#include "servotune/metrics.hpp"
#include "servotune/plant.hpp"
#include "servotune/refgen.hpp"
#include "servotune/simloop.hpp"
#include "servotune/tuner.hpp"

namespace servotune {

/// Short bidirectional move: 5 mm at 0.2 m/s, a = d = 100 m/s^2, 0.5 s dwells.
TrajectorySpec desk_trajectory();

struct Experiment {
  PlantParams plant = paper_table1_plant();
  CurrentControllerGains current{};
  TrajectorySpec trajectory = desk_trajectory();
  SimConfig sim{};
  MetricOptions metric_options{};
  CostWeights weights = paper_table2_sim_weights();

  void validate() const;
  ReferenceProfile profile() const;
  SimTrace trace(const GainVector& g) const;
  MetricVector metrics(const GainVector& g) const;
  double cost(const GainVector& g) const;
  Oracle oracle() const;
};

struct MetricTable {
  FeasibleSet set;
  std::vector<MetricVector> rows;  // one per flat grid index

  std::vector<double> costs(const CostWeights& w) const;
};

MetricTable evaluate_grid(const Experiment& ex, const FeasibleSet& set, int threads = 1);

/// CSV with a header; doubles are written with 17 significant digits so a
/// reloaded table reproduces the costs bitwise.
void write_table(const MetricTable& t, std::ostream& out);
/// Throws ConfigError when the file does not match `set`.
MetricTable read_table(std::istream& in, const FeasibleSet& set);

}  // namespace servotune

#endif  // SERVOTUNE_EXPERIMENT_HPP
