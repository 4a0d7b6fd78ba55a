#include "crowdnav/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace crowdnav {
namespace {

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw std::invalid_argument("expected a number, got '" + v + "'");
  return x;
}

template <typename Int>
Int parse_int(const std::string& v) {
  Int x{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected an integer, got '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true/false, got '" + v + "'");
}

// Shortest form that parses back to the same double.
std::string show(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <typename Int>
std::string show_int(Int x) {
  return std::to_string(x);
}

template <typename Access>
Field real(std::string key, Access access) {
  return {std::move(key),
          [access](RunConfig& c, const std::string& v) { access(c) = parse_double(v); },
          [access](const RunConfig& c) { return show(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field integer(std::string key, Access access) {
  return {std::move(key),
          [access](RunConfig& c, const std::string& v) {
            auto& ref = access(c);
            ref = parse_int<std::remove_reference_t<decltype(ref)>>(v);
          },
          [access](const RunConfig& c) { return show_int(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field boolean(std::string key, Access access) {
  return {std::move(key),
          [access](RunConfig& c, const std::string& v) { access(c) = parse_bool(v); },
          [access](const RunConfig& c) {
            return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

#define CN_REF(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      // simulator
      real("arena_half_width", CN_REF(sim.arena_half_width)),
      real("sensor_range", CN_REF(sim.sensor_range)),
      integer("max_humans", CN_REF(sim.max_humans)),
      real("dt", CN_REF(sim.dt)),
      integer("max_steps", CN_REF(sim.max_steps)),
      boolean("randomize_traits", CN_REF(sim.randomize_traits)),
      real("goal_change_prob", CN_REF(sim.goal_change_prob)),
      integer("rng_seed", CN_REF(sim.rng_seed)),
      real("robot_radius", CN_REF(sim.robot_radius)),
      real("robot_v_max", CN_REF(sim.robot_v_max)),
      real("human_radius", CN_REF(sim.human_radius)),
      real("human_v_max", CN_REF(sim.human_v_max)),
      {"predictor",
       [](RunConfig& c, const std::string& v) { c.sim.predictor = predict::parse_predictor_kind(v); },
       [](const RunConfig& c) { return std::string(predict::to_string(c.sim.predictor)); }},
      integer("prediction_steps", CN_REF(sim.prediction_steps)),
      integer("history_steps", CN_REF(sim.history_steps)),
      real("zone_radius", CN_REF(sim.zone_radius)),
      real("human_orca_time_horizon", CN_REF(sim.human_orca.time_horizon)),
      real("human_orca_neighbor_dist", CN_REF(sim.human_orca.neighbor_dist)),
      integer("human_orca_max_neighbors", CN_REF(sim.human_orca.max_neighbors)),
      // robot baselines
      real("robot_orca_time_horizon", CN_REF(robot_orca.time_horizon)),
      real("robot_orca_neighbor_dist", CN_REF(robot_orca.neighbor_dist)),
      integer("robot_orca_max_neighbors", CN_REF(robot_orca.max_neighbors)),
      real("sf_relaxation_time", CN_REF(robot_sf.relaxation_time)),
      real("sf_repulsion_strength", CN_REF(robot_sf.repulsion_strength)),
      real("sf_repulsion_range", CN_REF(robot_sf.repulsion_range)),
      // training
      integer("num_envs", CN_REF(train.num_envs)),
      integer("steps_per_update", CN_REF(train.steps_per_update)),
      integer("total_steps", CN_REF(train.total_steps)),
      real("lr", CN_REF(train.lr)),
      real("gamma", CN_REF(train.gamma)),
      real("lambda", CN_REF(train.lambda)),
      real("clip_epsilon", CN_REF(train.clip_epsilon)),
      real("value_coef", CN_REF(train.value_coef)),
      real("entropy_coef", CN_REF(train.entropy_coef)),
      integer("epochs", CN_REF(train.epochs)),
      integer("minibatches", CN_REF(train.minibatches)),
      real("max_grad_norm", CN_REF(train.max_grad_norm)),
      real("reward_scale", CN_REF(train.reward_scale)),
      real("adam_beta1", CN_REF(train.adam_beta1)),
      real("adam_beta2", CN_REF(train.adam_beta2)),
      real("adam_eps", CN_REF(train.adam_eps)),
      integer("train_seed", CN_REF(train.seed)),
      integer("checkpoint_every", CN_REF(train.checkpoint_every)),
      integer("sr_window", CN_REF(train.sr_window)),
      // network
      integer("d_hh", CN_REF(policy.d_hh)),
      integer("hh_heads", CN_REF(policy.hh_heads)),
      integer("d_rh", CN_REF(policy.d_rh)),
      integer("d_r", CN_REF(policy.d_r)),
      integer("d_h", CN_REF(policy.d_h)),
      real("init_log_std", CN_REF(policy.init_log_std)),
      integer("init_seed", CN_REF(policy.init_seed)),
      // evaluation
      integer("eval_episodes", CN_REF(eval_episodes)),
      integer("eval_seed", CN_REF(eval_seed)),
  };
  return table;
}

#undef CN_REF

}  // namespace

void RunConfig::sync() {
  policy.horizon = sim.horizon();
  policy.max_humans = sim.max_humans;
}

void RunConfig::validate() const {
  sim.validate();
  train.validate();
  policy.validate();
  if (eval_episodes < 0) throw std::invalid_argument("eval_episodes must be non-negative");
}

bool set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, value);
      return true;
    }
  }
  return false;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (!set_config_value(config, key, value)) {
        throw ConfigError(where + ": unknown key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + key + ": " + e.what());
    }
  }
  config.sync();
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_config(in, path.string());
}

std::string to_text(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.get(config) << '\n';
  return out.str();
}

}  // namespace crowdnav
