#include "servotune/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "servotune/baselines.hpp"
#include "servotune/errors.hpp"

namespace servotune {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kMetricNames[] = {"overshoot", "undershoot", "settling_time", "inf_norm",
                                    "itae",      "steady_state", "zero_error"};

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json gains_json(const GainVector& g) {
  json j{{"Kp", g.Kp}, {"Kv", g.Kv}, {"Ki", g.Ki}};
  if (g.Tn) j["Tn"] = *g.Tn;
  return j;
}

json metrics_json(const MetricVector& m) {
  json p = json::object(), s = json::object();
  for (int i = 0; i < kPositionMetrics; ++i) p[kMetricNames[i]] = num(m.position[static_cast<size_t>(i)]);
  for (int i = 0; i < kSpeedMetrics; ++i) s[kMetricNames[i]] = num(m.speed[static_cast<size_t>(i)]);
  return {{"position", p}, {"speed", s}, {"diverged", m.diverged}};
}

json record_base(const RunConfig& cfg, const std::string& command) {
  json j;
  j["command"] = command;
  j["config_hash"] = cfg.hash();
  j["timestamp"] = timestamp();
  j["seed"] = cfg.seed;
  j["config"] = cfg.entries();
  return j;
}

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw ConfigError("cannot create output directory '" + cfg.out_dir + "'");
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
  return f;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

// Position-only and speed-only parts of the cost.
std::pair<double, double> split_cost(const MetricVector& m, const CostWeights& w) {
  CostWeights wp = w, ws = w;
  wp.speed.fill(0.0);
  ws.position.fill(0.0);
  if (m.diverged || !m.finite()) return {w.divergence_penalty, w.divergence_penalty};
  return {cost(m, wp), cost(m, ws)};
}

BoConfig bo_config(const RunConfig& cfg) {
  BoConfig b = cfg.bo;
  b.seed = cfg.seed;
  return b;
}

json bo_json(const BoState& st) {
  json it = json::array();
  for (const BoRecord& r : st.history)
    it.push_back({{"m", r.m}, {"index", r.index}, {"gains", gains_json(r.gains)}, {"y", num(r.y)},
                  {"mu", num(r.mu)}, {"sigma", num(r.sigma)}, {"incumbent", r.incumbent + 1},
                  {"incumbent_cost", num(r.incumbent_cost)}});
  json h{{"sigma_f", st.hyper.sigma_f}, {"sigma_w", st.hyper.sigma_w},
         {"lengthscales", std::vector<double>(st.hyper.lengthscales.data(),
                                              st.hyper.lengthscales.data() + st.hyper.lengthscales.size())}};
  return {{"stop", to_string(st.stop)}, {"evaluations", st.m()}, {"hyperparameters", h},
          {"y_mean", st.y_mean}, {"y_scale", st.y_scale}, {"iterations", it}, {"error", st.error}};
}

void write_convergence(const BoState& st, std::ostream& out) {
  out << "m,y,incumbent_cost,mu,sigma,lower_3sd,upper_3sd\n";
  out.precision(17);
  for (const BoRecord& r : st.history)
    out << r.m << ',' << r.y << ',' << r.incumbent_cost << ',' << r.mu << ',' << r.sigma << ','
        << r.mu - 3.0 * r.sigma << ',' << r.mu + 3.0 * r.sigma << '\n';
}

void print_history(const BoState& st, std::ostream& log) {
  for (const BoRecord& r : st.history)
    log << "m=" << r.m << " x=(" << r.gains.Kp << ", " << r.gains.Kv << ", " << r.gains.Ki
        << ") y=" << r.y << " incumbent=" << r.incumbent_cost << '\n';
}

fs::path cache_path(const RunConfig& cfg, const std::string& cache_dir) {
  const fs::path dir = cache_dir.empty() ? fs::path(cfg.out_dir) / "cache" : fs::path(cache_dir);
  return dir / ("grid-" + cfg.table_hash() + ".csv");
}

}  // namespace

GainVector parse_gains(const std::string& text, const FeasibleSet& set) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string c; std::getline(ss, c, ',');) {
    char* end = nullptr;
    const double x = std::strtod(c.c_str(), &end);
    if (c.empty() || end != c.c_str() + c.size()) throw ConfigError("malformed gains '" + text + "'");
    v.push_back(x);
  }
  if (v.size() != 3) throw ConfigError("gains need three values: Kp,Kv,Ki");
  if (!(v[0] > 0.0) || !(v[1] > 0.0) || !(v[2] > 0.0) || !std::isfinite(v[0]) ||
      !std::isfinite(v[1]) || !std::isfinite(v[2]))
    throw ConfigError("gains must be positive and finite");
  const GainVector g = set.integral == IntegralParam::tn ? GainVector::from_tn(v[0], v[1], v[2])
                                                         : GainVector{v[0], v[1], v[2], std::nullopt};
  if (!set.contains(g)) throw ConfigError("gains '" + text + "' lie outside the feasible set");
  return g;
}

int cmd_simulate(const RunConfig& cfg, const GainVector& gains, std::ostream& log) {
  cfg.validate();
  const fs::path out = prepare_out(cfg);
  const Experiment& ex = cfg.experiment;
  const ReferenceProfile ref = ex.profile();
  const SimTrace tr = simulate(ex.plant, gains, ex.current, ref, ex.sim);
  const MetricVector m = extract_metrics(tr, ref, ex.metric_options);
  const double f = cost(m, ex.weights);
  const auto [fp, fs_] = split_cost(m, ex.weights);

  {
    std::ofstream t = open_out(out / "trace.csv");
    write_csv(tr, t);
    std::ofstream r = open_out(out / "reference.csv");
    write_csv(ref, r);
  }
  json j = record_base(cfg, "simulate");
  j["gains"] = gains_json(gains);
  j["metrics"] = metrics_json(m);
  j["cost"] = num(f);
  j["cost_position"] = num(fp);
  j["cost_speed"] = num(fs_);
  j["diverged"] = tr.diverged;
  j["files"] = {{"trace", "trace.csv"}, {"reference", "reference.csv"}};
  write_json(out / "simulate.json", j);

  log << "gains: Kp=" << gains.Kp << " Kv=" << gains.Kv << " Ki=" << gains.Ki << '\n';
  for (int i = 0; i < kPositionMetrics; ++i)
    log << "  position " << kMetricNames[i] << " = " << m.position[static_cast<size_t>(i)] << '\n';
  for (int i = 0; i < kSpeedMetrics; ++i)
    log << "  speed " << kMetricNames[i] << " = " << m.speed[static_cast<size_t>(i)] << '\n';
  log << "cost f = " << f << " (f_p = " << fp << ", f_s = " << fs_ << ")\n";
  if (tr.diverged) {
    log << "simulation diverged at t = " << tr.divergence_time << " s\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_tune(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path out = prepare_out(cfg);
  const BoState st = run_bo(cfg.experiment.oracle(), cfg.set, bo_config(cfg));
  print_history(st, log);

  json j = record_base(cfg, "tune");
  j["bo"] = bo_json(st);
  j["files"] = {{"log", "tune_log.csv"}, {"convergence", "tune_convergence.csv"}};
  {
    std::ofstream l = open_out(out / "tune_log.csv");
    write_bo_log(st, l);
    std::ofstream c = open_out(out / "tune_convergence.csv");
    write_convergence(st, c);
  }
  if (st.stop == StopReason::oracle_failure || st.incumbent < 0) {
    write_json(out / "tune.json", j);
    log << "tuning failed: " << st.error << '\n';
    return kExitFailure;
  }
  const BoRecord& best = st.best();
  const MetricVector m = cfg.experiment.metrics(best.gains);
  {
    std::ofstream t = open_out(out / "tune_trace.csv");
    write_csv(cfg.experiment.trace(best.gains), t);
  }
  j["files"]["trace"] = "tune_trace.csv";
  j["final_gains"] = gains_json(best.gains);
  j["final_metrics"] = metrics_json(m);
  j["final_cost"] = num(best.y);
  write_json(out / "tune.json", j);
  log << "stop: " << to_string(st.stop) << " after " << st.m() << " evaluations\n"
      << "best: Kp=" << best.gains.Kp << " Kv=" << best.gains.Kv << " Ki=" << best.gains.Ki
      << " f=" << best.y << '\n';
  return m.diverged ? kExitFailure : kExitOk;
}

MetricTable cached_grid(const RunConfig& cfg, const std::string& cache_dir, std::ostream& log) {
  const fs::path p = cache_path(cfg, cache_dir);
  if (fs::exists(p)) {
    std::ifstream in(p);
    log << "grid: using cached table " << p.string() << '\n';
    return read_table(in, cfg.set);
  }
  log << "grid: evaluating " << cfg.set.size() << " gain vectors\n";
  MetricTable t = evaluate_grid(cfg.experiment, cfg.set, cfg.threads);
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream o = open_out(tmp);
    write_table(t, o);
  }
  fs::rename(tmp, p);
  return t;
}

int cmd_grid(const RunConfig& cfg, const std::string& cache_dir, std::ostream& log) {
  cfg.validate();
  const fs::path out = prepare_out(cfg);
  const MetricTable t = cached_grid(cfg, cache_dir, log);
  const GridResult g = argmin_table(t.costs(cfg.experiment.weights), cfg.set);
  {
    std::ofstream o = open_out(out / "grid_costs.csv");
    o << "index,Kp,Kv,I,cost\n";
    o.precision(17);
    for (long i = 0; i < cfg.set.size(); ++i) {
      const Eigen::Vector3d x = cfg.set.point(i);
      o << i << ',' << x(0) << ',' << x(1) << ',' << x(2) << ',' << g.table[static_cast<size_t>(i)] << '\n';
    }
  }
  json j = record_base(cfg, "grid");
  j["table_hash"] = cfg.table_hash();
  j["points"] = cfg.set.size();
  j["best_index"] = g.best;
  j["final_gains"] = gains_json(g.gains);
  j["final_metrics"] = metrics_json(t.rows[static_cast<size_t>(g.best)]);
  j["final_cost"] = num(g.cost);
  j["files"] = {{"costs", "grid_costs.csv"}};
  write_json(out / "grid.json", j);
  log << "grid optimum: Kp=" << g.gains.Kp << " Kv=" << g.gains.Kv << " Ki=" << g.gains.Ki
      << " f=" << g.cost << '\n';
  return kExitOk;
}

int cmd_compare(const RunConfig& cfg, const std::string& cache_dir, std::ostream& log) {
  cfg.validate();
  const fs::path out = prepare_out(cfg);
  const Experiment& ex = cfg.experiment;
  const MetricTable t = cached_grid(cfg, cache_dir, log);
  const std::vector<double> costs = t.costs(ex.weights);

  std::vector<TuningResult> rows;
  {
    const GridResult g = argmin_table(costs, cfg.set);
    TuningResult r;
    r.method = "grid";
    r.gains = g.gains;
    r.metrics = t.rows[static_cast<size_t>(g.best)];
    r.cost = g.cost;
    rows.push_back(r);
  }
  int status = kExitOk;
  json failures = json::object();
  auto attempt = [&](const std::string& name, auto&& fn) {
    try {
      rows.push_back(fn());
    } catch (const TuningError& e) {
      failures[name] = e.what();
      log << name << " failed: " << e.what() << '\n';
      status = kExitFailure;
    }
  };
  attempt("ziegler-nichols", [&] { return ziegler_nichols(ex, cfg.set); });
  attempt("itae", [&] { return itae_tune(t, ex.weights); });
  attempt("relay", [&] { return relay_tune(ex, cfg.set); });

  // The table holds the simulator's metrics bitwise, so BO can replay it.
  const BoState st = run_bo(table_oracle(costs, cfg.set), cfg.set, bo_config(cfg));
  if (st.incumbent >= 0) {
    TuningResult r;
    r.method = "bo";
    r.gains = st.best().gains;
    r.metrics = t.rows[static_cast<size_t>(st.best().index)];
    r.cost = st.best().y;
    rows.push_back(r);
  } else {
    failures["bo"] = st.error;
    status = kExitFailure;
  }

  json table = json::array();
  std::ofstream csv = open_out(out / "compare.csv");
  csv << "method,Kp,Kv,Ki,f,f_p,f_s\n";
  csv.precision(17);
  log << std::left << std::setw(18) << "method" << std::setw(12) << "Kp" << std::setw(12) << "Kv"
      << std::setw(12) << "Ki" << "f\n";
  for (const TuningResult& r : rows) {
    const auto [fp, fs_] = split_cost(r.metrics, ex.weights);
    const std::string trace = "compare_trace_" + r.method + ".csv";
    {
      std::ofstream tf = open_out(out / trace);
      write_csv(ex.trace(r.gains), tf);
    }
    csv << r.method << ',' << r.gains.Kp << ',' << r.gains.Kv << ',' << r.gains.Ki << ',' << r.cost
        << ',' << fp << ',' << fs_ << '\n';
    json row{{"method", r.method}, {"gains", gains_json(r.gains)}, {"cost", num(r.cost)},
             {"cost_position", num(fp)}, {"cost_speed", num(fs_)}, {"metrics", metrics_json(r.metrics)},
             {"clamped", r.clamped}, {"trace", trace}};
    if (r.method == "ziegler-nichols" || r.method == "relay") {
      row["Ku"] = r.Ku;
      row["Tu"] = r.Tu;
      json probes = json::array();
      for (const ProbeRecord& p : r.probes)
        probes.push_back({{"stage", p.stage}, {"param", p.param}, {"value", num(p.value)}, {"period", p.period}});
      row["probes"] = probes;
    }
    if (r.method == "relay") {
      row["relay_amplitude"] = r.relay_amplitude;
      row["cycle_amplitude"] = r.cycle_amplitude;
    }
    table.push_back(row);
    log << std::left << std::setw(18) << r.method << std::setw(12) << r.gains.Kp << std::setw(12)
        << r.gains.Kv << std::setw(12) << r.gains.Ki << r.cost << '\n';
  }
  json j = record_base(cfg, "compare");
  j["table_hash"] = cfg.table_hash();
  j["rows"] = table;
  j["bo"] = bo_json(st);
  j["failures"] = failures;
  j["files"] = {{"table", "compare.csv"}};
  write_json(out / "compare.json", j);
  return status;
}

int cmd_sweep_m0(const RunConfig& cfg, const std::vector<int>& m0s, int repeats,
                 const std::string& cache_dir, std::ostream& log) {
  cfg.validate();
  if (m0s.empty()) throw ConfigError("sweep-m0 needs at least one m0 value");
  if (repeats < 1) throw ConfigError("repeats must be at least one");
  const fs::path out = prepare_out(cfg);
  const MetricTable t = cached_grid(cfg, cache_dir, log);
  const std::vector<double> costs = t.costs(cfg.experiment.weights);
  const double grid_min = argmin_table(costs, cfg.set).cost;
  const Oracle oracle = table_oracle(costs, cfg.set);

  auto quantile = [](std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };

  json rows = json::array();
  std::ofstream csv = open_out(out / "sweep_m0.csv");
  csv << "m0,repeats,median_opt_iterations,median_evaluations,cost_min,cost_q25,cost_median,cost_q75,"
         "cost_max,within_5pct,repeat_stops\n";
  csv.precision(17);
  for (int m0 : m0s) {
    std::vector<double> iters, evals, best;
    int within = 0, stops = 0;
    json runs = json::array();
    for (int r = 0; r < repeats; ++r) {
      BoConfig b = cfg.bo;
      b.m0 = m0;
      b.seed = cfg.seed + static_cast<std::uint64_t>(r);
      const BoState st = run_bo(oracle, cfg.set, b);
      if (st.incumbent < 0) throw TuningError("BO failed: " + st.error);
      iters.push_back(st.m() - m0);
      evals.push_back(st.m());
      best.push_back(st.best().y);
      within += st.best().y <= 1.05 * grid_min;
      stops += st.stop == StopReason::repeat_rule;
      runs.push_back({{"seed", b.seed}, {"evaluations", st.m()}, {"stop", to_string(st.stop)},
                      {"best_cost", st.best().y}, {"best_gains", gains_json(st.best().gains)}});
    }
    const json row{{"m0", m0},
                   {"repeats", repeats},
                   {"median_opt_iterations", quantile(iters, 0.5)},
                   {"median_evaluations", quantile(evals, 0.5)},
                   {"cost_quantiles", {quantile(best, 0.0), quantile(best, 0.25), quantile(best, 0.5),
                                       quantile(best, 0.75), quantile(best, 1.0)}},
                   {"within_5pct", within},
                   {"repeat_stops", stops},
                   {"runs", runs}};
    rows.push_back(row);
    csv << m0 << ',' << repeats << ',' << quantile(iters, 0.5) << ',' << quantile(evals, 0.5) << ','
        << quantile(best, 0.0) << ',' << quantile(best, 0.25) << ',' << quantile(best, 0.5) << ','
        << quantile(best, 0.75) << ',' << quantile(best, 1.0) << ',' << within << ',' << stops << '\n';
    log << "m0=" << m0 << " median optimization iterations " << quantile(iters, 0.5)
        << ", median incumbent cost " << quantile(best, 0.5) << ", within 5%: " << within << '/'
        << repeats << '\n';
  }
  json j = record_base(cfg, "sweep-m0");
  j["grid_min"] = grid_min;
  j["rows"] = rows;
  j["files"] = {{"table", "sweep_m0.csv"}};
  write_json(out / "sweep_m0.json", j);
  return kExitOk;
}

}  // namespace servotune
