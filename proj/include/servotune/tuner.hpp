#ifndef SERVOTUNE_TUNER_HPP
#define SERVOTUNE_TUNER_HPP

// GP-LCB Bayesian optimization over a gridded box of controller gains, and
// the exhaustive grid search it is measured against.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "servotune/gpr.hpp"
#include "servotune/simloop.hpp"

namespace servotune {

struct GridAxis {
  double min = 0.0;
  double max = 0.0;
  int points = 2;

  double value(int i) const;
  /// Nearest grid index of v (clamped).
  int nearest(double v) const;
};

enum class IntegralParam { ki, tn };

/// Box of (Kp, Kv, Ki) or (Kp, Kv, Tn), each axis sampled on a uniform grid.
struct FeasibleSet {
  std::array<GridAxis, 3> axes{};
  IntegralParam integral = IntegralParam::ki;

  void validate() const;
  long size() const;
  std::array<int, 3> unflatten(long flat) const;
  long flatten(const std::array<int, 3>& idx) const;
  Eigen::Vector3d point(long flat) const;
  /// Grid point scaled to [0, 1]^3 by the axis bounds.
  Eigen::Vector3d normalized(long flat) const;
  GainVector gains(long flat) const;
  /// Flat index of the grid point nearest to g.
  long locate(const GainVector& g) const;
  bool contains(const GainVector& g) const;
  /// Chebyshev distance in grid cells.
  int cell_distance(long a, long b) const;
};

/// Named boxes: desk-sim (default), paper-sim, paper-sim-full, paper-exp.
FeasibleSet feasible_set_preset(const std::string& name);

enum class BetaSchedule { constant, sqrt_log };

inline HyperBounds<double> default_bo_bounds() {
  HyperBounds<double> b;
  b.lengthscale_max = 3.0;
  return b;
}

struct BoConfig {
  int m0 = 20;
  double beta = 2.0;
  BetaSchedule schedule = BetaSchedule::constant;
  bool variance_form = false;  // mu - beta * var instead of mu - beta * sd
  int max_iterations = 60;     // acquisitions after the initial design
  int repeat_threshold = 3;
  int neighborhood = 1;        // grid cells around the incumbent
  int refit_every = 10;
  bool standardize = true;
  std::uint64_t seed = 0;
  // Inputs live in [0, 1]^3; lengthscales past a few box widths only flatten an axis.
  HyperBounds<double> bounds = default_bo_bounds();
  HyperFitOptions<double> fit{};

  void validate() const;
};

enum class StopReason { none, max_iterations, repeat_rule, oracle_failure };
std::string to_string(StopReason r);

/// One evaluation of the oracle.
struct BoRecord {
  int m = 0;          // 1-based evaluation count
  long index = 0;     // flat grid index
  GainVector gains;
  double y = 0.0;
  double mu = 0.0;    // posterior mean at the proposal, cost units (NaN for D_0)
  double sigma = 0.0; // posterior sd at the proposal, cost units (NaN for D_0)
  int incumbent = 0;  // 0-based index into the history after this evaluation
  double incumbent_cost = 0.0;
};

struct BoState {
  std::vector<BoRecord> history;
  std::optional<GpPosterior<double>> posterior;
  GpHyperparams<double> hyper;
  double y_mean = 0.0;
  double y_scale = 1.0;
  int incumbent = -1;
  int repeats = 0;
  StopReason stop = StopReason::none;
  std::string error;

  int m() const { return static_cast<int>(history.size()); }
  const BoRecord& best() const { return history.at(static_cast<size_t>(incumbent)); }
};

using Oracle = std::function<double(const GainVector&)>;

/// mu - beta * sd (or mu - beta * var with variance_form).
double lcb(const GpPosterior<double>& g, const Eigen::Ref<const Eigen::VectorXd>& x, double beta,
           bool variance_form = false);

double beta_at(const BoConfig& cfg, int m);

/// Latin-hypercube initial design over the grid.
std::vector<long> initial_design(const FeasibleSet& set, int m0, std::uint64_t seed);

/// Refits the posterior on the state's history (standardized targets).
void update_posterior(BoState& state, const FeasibleSet& set, const BoConfig& cfg, bool refit);

/// Grid index minimizing the LCB. With a flat history (all costs equal) the
/// incumbent is returned.
long next_point(const BoState& state, const FeasibleSet& set, const BoConfig& cfg);

BoState run_bo(const Oracle& oracle, const FeasibleSet& set, const BoConfig& cfg);

struct GridResult {
  long best = -1;
  GainVector gains;
  double cost = 0.0;
  std::vector<double> table;  // cost per flat index
};

/// Exhaustive evaluation; ties go to the lowest flat index.
GridResult grid_search(const Oracle& oracle, const FeasibleSet& set, int threads = 1);
GridResult argmin_table(const std::vector<double>& table, const FeasibleSet& set);

/// Looks costs up in a precomputed table; throws for gains off the grid.
Oracle table_oracle(std::vector<double> table, const FeasibleSet& set);

/// CSV, one row per evaluation.
void write_bo_log(const BoState& state, std::ostream& out);

}  // namespace servotune

#endif  // SERVOTUNE_TUNER_HPP
