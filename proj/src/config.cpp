#include "servotune/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <utility>
#include <vector>

#include "servotune/errors.hpp"

namespace servotune {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }

double to_double(const std::string& key, const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
  return v;
}

long to_long(const std::string& key, const std::string& s) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    throw ConfigError("'" + key + "' expects an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Key {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename M>
Key number(M member) {
  return {[member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_double(k, v); }};
}

template <typename M>
Key integer(M member) {
  return {[member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_long(k, v));
          }};
}

template <typename M>
Key boolean(M member) {
  return {[member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_bool(k, v); }};
}

const char* const kMetricNames[] = {"overshoot", "undershoot", "settling", "inf", "itae", "ss", "zero"};

const std::vector<std::pair<std::string, Key>>& keys() {
  static const std::vector<std::pair<std::string, Key>> table = [] {
    std::vector<std::pair<std::string, Key>> k;
    k.push_back({"plant", {[](const RunConfig& c) { return c.plant_preset; },
                           [](RunConfig& c, const std::string&, const std::string& v) {
                             c.experiment.plant = plant_preset(v);
                             c.plant_preset = v;
                           }}});
#define PLANT(name) k.push_back({"plant." #name, number([](RunConfig& c) -> double& { return c.experiment.plant.name; })})
    PLANT(Rs); PLANT(Ls); PLANT(Kt); PLANT(Kb); PLANT(Jm); PLANT(Bm);
    PLANT(Jl); PLANT(Bml); PLANT(Bl); PLANT(Ks); PLANT(Q); PLANT(omega_max);
#undef PLANT
    k.push_back({"current.Kcp", number([](RunConfig& c) -> double& { return c.experiment.current.Kcp; })});
    k.push_back({"current.Kci", number([](RunConfig& c) -> double& { return c.experiment.current.Kci; })});
    k.push_back({"current.Kcd", number([](RunConfig& c) -> double& { return c.experiment.current.Kcd; })});

    k.push_back({"trajectory.position", number([](RunConfig& c) -> double& { return c.experiment.trajectory.position_setpoint; })});
    k.push_back({"trajectory.speed", number([](RunConfig& c) -> double& { return c.experiment.trajectory.speed_setpoint; })});
    k.push_back({"trajectory.acceleration", number([](RunConfig& c) -> double& { return c.experiment.trajectory.acceleration; })});
    k.push_back({"trajectory.deceleration", number([](RunConfig& c) -> double& { return c.experiment.trajectory.deceleration; })});
    k.push_back({"trajectory.dwell", number([](RunConfig& c) -> double& { return c.experiment.trajectory.dwell_time; })});
    k.push_back({"trajectory.return", boolean([](RunConfig& c) -> bool& { return c.experiment.trajectory.return_to_zero; })});

#define SIMNUM(key, field) k.push_back({"sim." key, number([](RunConfig& c) -> double& { return c.experiment.sim.field; })})
    SIMNUM("controller_period", controller_period);
    SIMNUM("substep", substep);
    SIMNUM("voltage_limit", voltage_limit);
    SIMNUM("current_limit", current_limit);
    SIMNUM("derivative_filter", derivative_filter);
    SIMNUM("length_unit", length_unit);
    SIMNUM("derivative_time_unit", derivative_time_unit);
    SIMNUM("noise_position", noise_position);
    SIMNUM("noise_speed", noise_speed);
    SIMNUM("noise_current", noise_current);
    SIMNUM("divergence_threshold", divergence_threshold);
#undef SIMNUM
    k.push_back({"sim.noise_seed", integer([](RunConfig& c) -> std::uint64_t& { return c.experiment.sim.noise_seed; })});
    k.push_back({"sim.anti_windup", boolean([](RunConfig& c) -> bool& { return c.experiment.sim.anti_windup; })});
    k.push_back({"sim.rigid_plant", boolean([](RunConfig& c) -> bool& { return c.experiment.sim.rigid_plant; })});
    k.push_back({"sim.mode", {[](const RunConfig& c) { return to_string(c.experiment.sim.mode); },
                              [](RunConfig& c, const std::string&, const std::string& v) {
                                c.experiment.sim.mode = parse_control_mode(v);
                              }}});
    k.push_back({"sim.position_loop", {[](const RunConfig& c) { return to_string(c.experiment.sim.position_loop_mode); },
                                       [](RunConfig& c, const std::string&, const std::string& v) {
                                         c.experiment.sim.position_loop_mode = parse_position_loop_mode(v);
                                       }}});

    k.push_back({"metrics.band", number([](RunConfig& c) -> double& { return c.experiment.metric_options.band_fraction; })});
    k.push_back({"metrics.ss_window", number([](RunConfig& c) -> double& { return c.experiment.metric_options.ss_window; })});
    k.push_back({"metrics.zero_window", number([](RunConfig& c) -> double& { return c.experiment.metric_options.zero_window; })});
    k.push_back({"metrics.overshoot_percent", boolean([](RunConfig& c) -> bool& { return c.experiment.metric_options.overshoot_percent; })});

    k.push_back({"weights", {[](const RunConfig& c) { return c.weight_preset; },
                             [](RunConfig& c, const std::string&, const std::string& v) {
                               c.experiment.weights = weights_preset(v);
                               c.weight_preset = v;
                             }}});
    for (int i = 0; i < kPositionMetrics; ++i)
      k.push_back({std::string("weights.p.") + kMetricNames[i],
                   number([i](RunConfig& c) -> double& { return c.experiment.weights.position[static_cast<size_t>(i)]; })});
    for (int i = 0; i < kSpeedMetrics; ++i)
      k.push_back({std::string("weights.s.") + kMetricNames[i],
                   number([i](RunConfig& c) -> double& { return c.experiment.weights.speed[static_cast<size_t>(i)]; })});
    k.push_back({"weights.penalty", number([](RunConfig& c) -> double& { return c.experiment.weights.divergence_penalty; })});

    k.push_back({"set", {[](const RunConfig& c) { return c.set_preset; },
                         [](RunConfig& c, const std::string&, const std::string& v) {
                           c.set = feasible_set_preset(v);
                           c.set_preset = v;
                         }}});
    const char* const axes[] = {"kp", "kv", "i"};
    for (int a = 0; a < 3; ++a) {
      const std::string p = std::string("set.") + axes[a];
      k.push_back({p + ".min", number([a](RunConfig& c) -> double& { return c.set.axes[static_cast<size_t>(a)].min; })});
      k.push_back({p + ".max", number([a](RunConfig& c) -> double& { return c.set.axes[static_cast<size_t>(a)].max; })});
      k.push_back({p + ".points", integer([a](RunConfig& c) -> int& { return c.set.axes[static_cast<size_t>(a)].points; })});
    }
    k.push_back({"set.integral", {[](const RunConfig& c) { return std::string(c.set.integral == IntegralParam::ki ? "ki" : "tn"); },
                                  [](RunConfig& c, const std::string& key, const std::string& v) {
                                    if (v == "ki") c.set.integral = IntegralParam::ki;
                                    else if (v == "tn") c.set.integral = IntegralParam::tn;
                                    else throw ConfigError("'" + key + "' expects ki or tn");
                                  }}});

    k.push_back({"bo.m0", integer([](RunConfig& c) -> int& { return c.bo.m0; })});
    k.push_back({"bo.beta", number([](RunConfig& c) -> double& { return c.bo.beta; })});
    k.push_back({"bo.schedule", {[](const RunConfig& c) {
                                   return std::string(c.bo.schedule == BetaSchedule::constant ? "constant" : "sqrt-log");
                                 },
                                 [](RunConfig& c, const std::string& key, const std::string& v) {
                                   if (v == "constant") c.bo.schedule = BetaSchedule::constant;
                                   else if (v == "sqrt-log") c.bo.schedule = BetaSchedule::sqrt_log;
                                   else throw ConfigError("'" + key + "' expects constant or sqrt-log");
                                 }}});
    k.push_back({"bo.variance_form", boolean([](RunConfig& c) -> bool& { return c.bo.variance_form; })});
    k.push_back({"bo.max_iters", integer([](RunConfig& c) -> int& { return c.bo.max_iterations; })});
    k.push_back({"bo.repeat", integer([](RunConfig& c) -> int& { return c.bo.repeat_threshold; })});
    k.push_back({"bo.neighborhood", integer([](RunConfig& c) -> int& { return c.bo.neighborhood; })});
    k.push_back({"bo.refit_every", integer([](RunConfig& c) -> int& { return c.bo.refit_every; })});
    k.push_back({"bo.standardize", boolean([](RunConfig& c) -> bool& { return c.bo.standardize; })});
    k.push_back({"bo.starts", integer([](RunConfig& c) -> int& { return c.bo.fit.starts; })});
    k.push_back({"bo.lengthscale_min", number([](RunConfig& c) -> double& { return c.bo.bounds.lengthscale_min; })});
    k.push_back({"bo.lengthscale_max", number([](RunConfig& c) -> double& { return c.bo.bounds.lengthscale_max; })});

    k.push_back({"seed", integer([](RunConfig& c) -> std::uint64_t& { return c.seed; })});
    k.push_back({"out", {[](const RunConfig& c) { return c.out_dir; },
                         [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }}});
    k.push_back({"threads", integer([](RunConfig& c) -> int& { return c.threads; })});
    return k;
  }();
  return table;
}

bool table_key(const std::string& k) {
  for (const char* p : {"plant", "current.", "trajectory.", "sim.", "metrics.", "set"})
    if (k.rfind(p, 0) == 0) return true;
  return false;
}

std::string join(const std::map<std::string, std::string>& m) {
  std::string s;
  for (const auto& [k, v] : m) s += k + " = " + v + "\n";
  return s;
}

}  // namespace

void RunConfig::set_value(const std::string& key, const std::string& value) {
  for (const auto& [name, k] : keys()) {
    if (name == key) {
      k.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

void RunConfig::validate() const {
  try {
    experiment.validate();
    set.validate();
    bo.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  if (threads < 1) throw ConfigError("threads must be at least one");
}

std::map<std::string, std::string> RunConfig::entries() const {
  std::map<std::string, std::string> m;
  for (const auto& [name, k] : keys())
    if (name != "out" && name != "threads") m[name] = k.get(*this);
  return m;
}

std::string RunConfig::canonical() const { return join(entries()); }

std::string RunConfig::table_hash() const {
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : entries())
    if (table_key(k)) m[k] = v;
  return fnv1a_hex(join(m));
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    base.set_value(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, std::move(base));
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PlantParams plant_preset(const std::string& name) {
  if (name == "paper-table1") return paper_table1_plant();
  throw ConfigError("unknown plant preset '" + name + "'");
}

}  // namespace servotune
