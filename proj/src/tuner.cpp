#include "servotune/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "servotune/errors.hpp"

namespace servotune {

double GridAxis::value(int i) const {
  if (points == 1) return max;
  return min + (max - min) * static_cast<double>(i) / static_cast<double>(points - 1);
}

int GridAxis::nearest(double v) const {
  if (points == 1) return 0;
  const double u = (v - min) / (max - min) * static_cast<double>(points - 1);
  return std::clamp(static_cast<int>(std::lround(u)), 0, points - 1);
}

void FeasibleSet::validate() const {
  for (const GridAxis& a : axes) {
    if (!(a.min > 0.0)) throw InvalidArgument("feasible-set lower bounds must be positive");
    if (!(a.min < a.max)) throw InvalidArgument("feasible-set bounds must satisfy min < max");
    if (a.points < 2) throw InvalidArgument("each grid axis needs at least two points");
  }
}

long FeasibleSet::size() const {
  return static_cast<long>(axes[0].points) * axes[1].points * axes[2].points;
}

std::array<int, 3> FeasibleSet::unflatten(long flat) const {
  if (flat < 0 || flat >= size()) throw InvalidArgument("grid index out of range");
  const int k = static_cast<int>(flat % axes[2].points);
  flat /= axes[2].points;
  const int j = static_cast<int>(flat % axes[1].points);
  const int i = static_cast<int>(flat / axes[1].points);
  return {i, j, k};
}

long FeasibleSet::flatten(const std::array<int, 3>& idx) const {
  for (int a = 0; a < 3; ++a)
    if (idx[a] < 0 || idx[a] >= axes[a].points) throw InvalidArgument("grid index out of range");
  return (static_cast<long>(idx[0]) * axes[1].points + idx[1]) * axes[2].points + idx[2];
}

Eigen::Vector3d FeasibleSet::point(long flat) const {
  const auto idx = unflatten(flat);
  return {axes[0].value(idx[0]), axes[1].value(idx[1]), axes[2].value(idx[2])};
}

Eigen::Vector3d FeasibleSet::normalized(long flat) const {
  const Eigen::Vector3d p = point(flat);
  Eigen::Vector3d u;
  for (int a = 0; a < 3; ++a) u(a) = (p(a) - axes[a].min) / (axes[a].max - axes[a].min);
  return u;
}

GainVector FeasibleSet::gains(long flat) const {
  const Eigen::Vector3d p = point(flat);
  if (integral == IntegralParam::tn) return GainVector::from_tn(p(0), p(1), p(2));
  return {p(0), p(1), p(2), std::nullopt};
}

namespace {

double third_param(const FeasibleSet& s, const GainVector& g) {
  if (s.integral == IntegralParam::ki) return g.Ki;
  return g.Tn ? *g.Tn : g.Kv / g.Ki;
}

}  // namespace

long FeasibleSet::locate(const GainVector& g) const {
  return flatten({axes[0].nearest(g.Kp), axes[1].nearest(g.Kv), axes[2].nearest(third_param(*this, g))});
}

bool FeasibleSet::contains(const GainVector& g) const {
  const double v[3] = {g.Kp, g.Kv, third_param(*this, g)};
  for (int a = 0; a < 3; ++a) {
    const double tol = 1e-12 * axes[a].max;
    if (!(v[a] >= axes[a].min - tol && v[a] <= axes[a].max + tol)) return false;
  }
  return true;
}

int FeasibleSet::cell_distance(long a, long b) const {
  const auto ia = unflatten(a), ib = unflatten(b);
  int d = 0;
  for (int k = 0; k < 3; ++k) d = std::max(d, std::abs(ia[k] - ib[k]));
  return d;
}

FeasibleSet feasible_set_preset(const std::string& name) {
  FeasibleSet s;
  if (name == "desk-sim") {
    s.axes = {GridAxis{15.0, 420.0, 28}, GridAxis{0.05, 0.5, 10}, GridAxis{90.0, 900.0, 10}};
  } else if (name == "paper-sim") {
    s.axes = {GridAxis{150.0, 4200.0, 28}, GridAxis{0.05, 0.5, 10}, GridAxis{90.0, 900.0, 10}};
  } else if (name == "paper-sim-full") {
    s.axes = {GridAxis{15.0, 4200.0, 280}, GridAxis{0.5 / 90.0, 0.5, 90}, GridAxis{9.0, 900.0, 100}};
  } else if (name == "paper-exp") {
    s.axes = {GridAxis{65000.0 / 28.0, 65000.0, 28}, GridAxis{700.0, 7000.0, 10},
              GridAxis{4900.0, 40000.0, 10}};
    s.integral = IntegralParam::tn;
  } else {
    throw ConfigError("unknown feasible set '" + name + "'");
  }
  return s;
}

void BoConfig::validate() const {
  if (m0 < 3) throw InvalidArgument("initial design needs at least three points");
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be non-negative");
  if (repeat_threshold < 1) throw InvalidArgument("repeat threshold must be at least one");
  if (max_iterations < 0) throw InvalidArgument("max iterations must be non-negative");
  if (neighborhood < 0) throw InvalidArgument("neighborhood must be non-negative");
  if (refit_every < 1) throw InvalidArgument("refit cadence must be at least one");
  if (fit.starts < 1) throw InvalidArgument("hyperparameter fit needs at least one start");
  if (!(bounds.lengthscale_min > 0.0) || !(bounds.lengthscale_max > bounds.lengthscale_min))
    throw InvalidArgument("lengthscale bounds must satisfy 0 < min < max");
  if (!(bounds.sigma_f_min > 0.0) || !(bounds.sigma_f_max > bounds.sigma_f_min) ||
      !(bounds.sigma_w_max > bounds.sigma_w_min))
    throw InvalidArgument("hyperparameter bounds are inconsistent");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::none: return "none";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::repeat_rule: return "repeat_rule";
    case StopReason::oracle_failure: return "oracle_failure";
  }
  return "none";
}

double lcb(const GpPosterior<double>& g, const Eigen::Ref<const Eigen::VectorXd>& x, double beta,
           bool variance_form) {
  const Prediction<double> p = predict(g, x);
  return p.mean - beta * (variance_form ? p.var : std::sqrt(p.var));
}

double beta_at(const BoConfig& cfg, int m) {
  if (cfg.schedule == BetaSchedule::constant) return cfg.beta;
  return cfg.beta * std::sqrt(std::log(static_cast<double>(std::max(m, 3))));
}

std::vector<long> initial_design(const FeasibleSet& set, int m0, std::uint64_t seed) {
  set.validate();
  if (m0 < 1) throw InvalidArgument("initial design needs at least one point");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<std::vector<int>, 3> idx;
  for (int a = 0; a < 3; ++a) {
    std::vector<int> perm(static_cast<size_t>(m0));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int j = 0; j < m0; ++j) {
      const double u = (perm[static_cast<size_t>(j)] + unit(rng)) / m0;
      idx[a].push_back(std::min(set.axes[a].points - 1,
                                static_cast<int>(u * set.axes[a].points)));
    }
  }
  std::vector<long> out;
  for (int j = 0; j < m0; ++j)
    out.push_back(set.flatten({idx[0][static_cast<size_t>(j)], idx[1][static_cast<size_t>(j)],
                               idx[2][static_cast<size_t>(j)]}));
  return out;
}

namespace {

GpHyperparams<double> default_hyper() {
  GpHyperparams<double> h;
  h.sigma_f = 1.0;
  h.lengthscales = Eigen::Vector3d::Constant(0.3);
  h.sigma_w = 1e-2;
  return h;
}

}  // namespace

void update_posterior(BoState& state, const FeasibleSet& set, const BoConfig& cfg, bool refit) {
  const int m = state.m();
  if (m == 0) throw InvalidArgument("no observations to fit");
  if (state.hyper.dims() == 0) state.hyper = default_hyper();

  Dataset<double> data;
  data.X.resize(m, 3);
  data.y.resize(m);
  for (int i = 0; i < m; ++i) {
    const BoRecord& r = state.history[static_cast<size_t>(i)];
    data.X.row(i) = set.normalized(r.index).transpose();
    data.y(i) = r.y;
  }
  if (!state.posterior) {
    // Standardization constants come from the initial design only.
    state.y_mean = 0.0;
    state.y_scale = 1.0;
    if (cfg.standardize) {
      state.y_mean = data.y.mean();
      const double sd = std::sqrt((data.y.array() - state.y_mean).square().mean());
      if (sd > 0.0 && std::isfinite(sd)) state.y_scale = sd;
    }
  }
  data.y = (data.y.array() - state.y_mean) / state.y_scale;
  if (refit && m >= 3) state.hyper = fit_hyperparams(data, state.hyper, cfg.bounds, cfg.fit);
  state.posterior = fit(data, state.hyper);
}

long next_point(const BoState& state, const FeasibleSet& set, const BoConfig& cfg) {
  if (set.size() == 0) throw InvalidArgument("empty candidate grid");
  if (!state.posterior) throw InvalidArgument("posterior not fitted");
  const auto [lo, hi] = std::minmax_element(
      state.history.begin(), state.history.end(),
      [](const BoRecord& a, const BoRecord& b) { return a.y < b.y; });
  if (lo->y == hi->y) return state.best().index;

  const double beta = beta_at(cfg, state.m());
  long best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (long i = 0; i < set.size(); ++i) {
    const double v = lcb(*state.posterior, set.normalized(i), beta, cfg.variance_form);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

namespace {

bool evaluate(BoState& state, const Oracle& oracle, const FeasibleSet& set, long index, double mu,
              double sigma) {
  BoRecord r;
  r.m = state.m() + 1;
  r.index = index;
  r.gains = set.gains(index);
  r.mu = mu;
  r.sigma = sigma;
  try {
    r.y = oracle(r.gains);
  } catch (const std::exception& e) {
    state.stop = StopReason::oracle_failure;
    state.error = e.what();
    return false;
  }
  if (std::isnan(r.y)) {
    state.stop = StopReason::oracle_failure;
    state.error = "oracle returned NaN";
    return false;
  }
  if (state.incumbent < 0 || r.y < state.best().y) state.incumbent = state.m();
  state.history.push_back(r);
  state.history.back().incumbent = state.incumbent;
  state.history.back().incumbent_cost = state.best().y;
  return true;
}

}  // namespace

BoState run_bo(const Oracle& oracle, const FeasibleSet& set, const BoConfig& cfg) {
  set.validate();
  cfg.validate();
  BoState state;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (long idx : initial_design(set, cfg.m0, cfg.seed))
    if (!evaluate(state, oracle, set, idx, nan, nan)) return state;
  update_posterior(state, set, cfg, true);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const long p = next_point(state, set, cfg);
    const bool near = set.cell_distance(p, state.best().index) <= cfg.neighborhood;
    const Prediction<double> pr = predict(*state.posterior, set.normalized(p));
    if (!evaluate(state, oracle, set, p, state.y_mean + state.y_scale * pr.mean,
                  state.y_scale * std::sqrt(pr.var)))
      return state;
    state.repeats = near ? state.repeats + 1 : 0;
    update_posterior(state, set, cfg, it % cfg.refit_every == 0);
    if (state.repeats >= cfg.repeat_threshold) {
      state.stop = StopReason::repeat_rule;
      return state;
    }
  }
  state.stop = StopReason::max_iterations;
  return state;
}

GridResult argmin_table(const std::vector<double>& table, const FeasibleSet& set) {
  if (static_cast<long>(table.size()) != set.size())
    throw InvalidArgument("table size does not match the grid");
  GridResult r;
  r.table = table;
  r.cost = std::numeric_limits<double>::infinity();
  for (long i = 0; i < set.size(); ++i) {
    if (table[static_cast<size_t>(i)] < r.cost) {
      r.cost = table[static_cast<size_t>(i)];
      r.best = i;
    }
  }
  if (r.best < 0) throw InvalidArgument("table holds no finite cost");
  r.gains = set.gains(r.best);
  return r;
}

GridResult grid_search(const Oracle& oracle, const FeasibleSet& set, int threads) {
  set.validate();
  const long n = set.size();
  std::vector<double> table(static_cast<size_t>(n));
  const int t = std::max(1, threads);
  if (t == 1) {
    for (long i = 0; i < n; ++i) table[static_cast<size_t>(i)] = oracle(set.gains(i));
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < t; ++w)
      pool.emplace_back([&, w] {
        for (long i = w; i < n; i += t) table[static_cast<size_t>(i)] = oracle(set.gains(i));
      });
    for (std::thread& th : pool) th.join();
  }
  return argmin_table(table, set);
}

Oracle table_oracle(std::vector<double> table, const FeasibleSet& set) {
  if (static_cast<long>(table.size()) != set.size())
    throw InvalidArgument("table size does not match the grid");
  return [table = std::move(table), set](const GainVector& g) {
    const long i = set.locate(g);
    const Eigen::Vector3d p = set.point(i);
    const double v[3] = {g.Kp, g.Kv, set.integral == IntegralParam::ki ? g.Ki : g.Kv / g.Ki};
    for (int a = 0; a < 3; ++a)
      if (std::abs(v[a] - p(a)) > 1e-9 * std::abs(p(a)))
        throw InvalidArgument("gains are not a grid point");
    return table[static_cast<size_t>(i)];
  };
}

void write_bo_log(const BoState& state, std::ostream& out) {
  out << "m,index,Kp,Kv,Ki,y,mu,sigma,incumbent,incumbent_cost\n";
  out.precision(17);
  for (const BoRecord& r : state.history)
    out << r.m << ',' << r.index << ',' << r.gains.Kp << ',' << r.gains.Kv << ',' << r.gains.Ki
        << ',' << r.y << ',' << r.mu << ',' << r.sigma << ',' << r.incumbent + 1 << ','
        << r.incumbent_cost << '\n';
}

}  // namespace servotune
