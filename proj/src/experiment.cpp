#include "servotune/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "servotune/errors.hpp"

namespace servotune {

TrajectorySpec desk_trajectory() {
  TrajectorySpec s;
  s.position_setpoint = 5e-3;
  s.speed_setpoint = 0.2;
  s.acceleration = 100.0;
  s.deceleration = 100.0;
  s.dwell_time = 0.5;
  s.return_to_zero = true;
  return s;
}

void Experiment::validate() const {
  plant.validate();
  current.validate();
  trajectory.validate();
  sim.validate();
  weights.validate();
}

ReferenceProfile Experiment::profile() const { return generate_profile(trajectory, sim.controller_period); }

SimTrace Experiment::trace(const GainVector& g) const {
  return simulate(plant, g, current, profile(), sim);
}

MetricVector Experiment::metrics(const GainVector& g) const {
  const ReferenceProfile p = profile();
  return extract_metrics(simulate(plant, g, current, p, sim), p, metric_options);
}

double Experiment::cost(const GainVector& g) const { return servotune::cost(metrics(g), weights); }

Oracle Experiment::oracle() const {
  return [ex = *this](const GainVector& g) { return ex.cost(g); };
}

std::vector<double> MetricTable::costs(const CostWeights& w) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const MetricVector& m : rows) out.push_back(cost(m, w));
  return out;
}

MetricTable evaluate_grid(const Experiment& ex, const FeasibleSet& set, int threads) {
  ex.validate();
  set.validate();
  MetricTable t;
  t.set = set;
  t.rows.resize(static_cast<size_t>(set.size()));
  const ReferenceProfile p = ex.profile();
  auto work = [&](long begin, long stride) {
    for (long i = begin; i < set.size(); i += stride)
      t.rows[static_cast<size_t>(i)] =
          extract_metrics(simulate(ex.plant, set.gains(i), ex.current, p, ex.sim), p, ex.metric_options);
  };
  const int n = std::max(1, threads);
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n; ++w) pool.emplace_back(work, w, n);
    for (std::thread& th : pool) th.join();
  }
  return t;
}

void write_table(const MetricTable& t, std::ostream& out) {
  out << "index,Kp,Kv,I,diverged";
  for (int i = 0; i < kPositionMetrics; ++i) out << ",p" << i;
  for (int i = 0; i < kSpeedMetrics; ++i) out << ",s" << i;
  out << '\n';
  out.precision(17);
  for (long i = 0; i < t.set.size(); ++i) {
    const Eigen::Vector3d x = t.set.point(i);
    const MetricVector& m = t.rows[static_cast<size_t>(i)];
    out << i << ',' << x(0) << ',' << x(1) << ',' << x(2) << ',' << (m.diverged ? 1 : 0);
    for (double v : m.position) out << ',' << v;
    for (double v : m.speed) out << ',' << v;
    out << '\n';
  }
}

namespace {

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ConfigError("malformed number '" + s + "' in metric table");
  return v;
}

}  // namespace

MetricTable read_table(std::istream& in, const FeasibleSet& set) {
  MetricTable t;
  t.set = set;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty metric table");
  long expected = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() != static_cast<size_t>(5 + kPositionMetrics + kSpeedMetrics))
      throw ConfigError("metric table row has the wrong number of columns");
    try {
      if (std::stol(cells[0]) != expected) throw ConfigError("metric table rows out of order");
      const Eigen::Vector3d x = set.point(expected);
      for (int a = 0; a < 3; ++a)
        if (std::abs(parse_double(cells[static_cast<size_t>(1 + a)]) - x(a)) > 1e-12 * std::abs(x(a)))
          throw ConfigError("metric table does not match the feasible set");
      MetricVector m;
      m.diverged = cells[4] == "1";
      size_t c = 5;
      for (double& v : m.position) v = parse_double(cells[c++]);
      for (double& v : m.speed) v = parse_double(cells[c++]);
      t.rows.push_back(m);
    } catch (const std::logic_error&) {
      throw ConfigError("malformed metric table row " + std::to_string(expected));
    }
    ++expected;
  }
  if (expected != set.size()) throw ConfigError("metric table is incomplete");
  return t;
}

}  // namespace servotune
