#include "crowdnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "crowdnav/reward.hpp"

namespace crowdnav {
namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr double kStartClearance = 0.2;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint64_t out = 0;
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  out = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return out;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void update_heading(AgentState& agent) {
  if (agent.velocity.x != 0.0 || agent.velocity.y != 0.0) {
    agent.heading = std::atan2(agent.velocity.y, agent.velocity.x);
  }
}

}  // namespace

void SimConfig::validate() const {
  if (!(arena_half_width > 0.0)) throw std::invalid_argument("arena_half_width must be positive");
  if (!(sensor_range > 0.0)) throw std::invalid_argument("sensor_range must be positive");
  if (max_humans < 0) throw std::invalid_argument("max_humans must be non-negative");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
  if (goal_change_prob < 0.0 || goal_change_prob > 1.0) {
    throw std::invalid_argument("goal_change_prob must lie in [0, 1]");
  }
  if (!(robot_radius > 0.0) || !(robot_v_max > 0.0)) {
    throw std::invalid_argument("robot radius and speed must be positive");
  }
  if (!(human_radius > 0.0) || !(human_v_max > 0.0)) {
    throw std::invalid_argument("human radius and speed must be positive");
  }
  if (prediction_steps < 0 || history_steps < 0) {
    throw std::invalid_argument("prediction_steps and history_steps must be non-negative");
  }
  if (!(human_orca.time_horizon > 0.0) || !(human_orca.neighbor_dist > 0.0) ||
      human_orca.max_neighbors <= 0) {
    throw std::invalid_argument("ORCA parameters must be positive");
  }
}

std::string_view to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::ReachedGoal:
      return "ReachedGoal";
    case OutcomeKind::Collision:
      return "Collision";
    case OutcomeKind::Timeout:
      return "Timeout";
  }
  return "Timeout";
}

OutcomeKind parse_outcome_kind(std::string_view name) {
  if (name == "ReachedGoal") return OutcomeKind::ReachedGoal;
  if (name == "Collision") return OutcomeKind::Collision;
  if (name == "Timeout") return OutcomeKind::Timeout;
  throw std::invalid_argument("unknown outcome '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Crowd

Crowd::Crowd(std::vector<AgentState> humans, std::uint64_t seed, const SimConfig& config)
    : humans_(std::move(humans)),
      rng_(seed),
      half_width_(config.arena_half_width),
      dt_(config.dt),
      randomize_(config.randomize_traits),
      goal_change_prob_(config.goal_change_prob),
      params_(config.human_orca) {}

Vec2 Crowd::random_point() {
  const double x = uniform(rng_, -half_width_, half_width_);
  const double y = uniform(rng_, -half_width_, half_width_);
  return {x, y};
}

void Crowd::advance() {
  const std::size_t n = humans_.size();
  std::vector<Vec2> velocities(n);
  std::vector<AgentState> others;
  others.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    others.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(humans_[j]);
    }
    velocities[i] = orca::orca_velocity(humans_[i], others, params_, dt_);
  }

  for (std::size_t i = 0; i < n; ++i) {
    AgentState& h = humans_[i];
    h.velocity = velocities[i];
    update_heading(h);
    h.position += h.velocity * dt_;
  }

  for (auto& h : humans_) {
    const bool arrived = distance(h.position, h.goal) < h.radius;
    const bool switch_goal = randomize_ && uniform(rng_, 0.0, 1.0) < goal_change_prob_;
    if (arrived || switch_goal) h.goal = random_point();
  }
}

// ---------------------------------------------------------------------------
// Environment

Environment::Environment(SimConfig config) : config_(std::move(config)) {
  config_.validate();
  predictor_ = predict::make_predictor(config_.predictor, config_.zone_radius);
}

void Environment::set_predictor(std::shared_ptr<const predict::Predictor> predictor) {
  predictor_ = std::move(predictor);
}

Observation Environment::reset(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  config_ = config;
  predictor_ = predict::make_predictor(config_.predictor, config_.zone_radius);
  return reset(seed);
}

Observation Environment::reset(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0));
  const double a = config_.arena_half_width;
  auto random_point = [&] {
    const double x = uniform(rng, -a, a);
    const double y = uniform(rng, -a, a);
    return Vec2{x, y};
  };

  std::vector<Disc> placed;
  auto place = [&](double radius) {
    for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
      const Vec2 p = random_point();
      const bool clear = std::all_of(placed.begin(), placed.end(), [&](const Disc& d) {
        return distance(p, d.center) >= radius + d.radius + kStartClearance;
      });
      if (clear) {
        placed.push_back({p, radius});
        return p;
      }
    }
    throw std::runtime_error("could not place agent after " +
                             std::to_string(kMaxPlacementAttempts) +
                             " attempts; arena over-packed");
  };

  robot_ = AgentState{};
  robot_.radius = config_.robot_radius;
  robot_.v_max = config_.robot_v_max;
  robot_.position = place(robot_.radius);
  robot_.goal = random_point();
  robot_.heading = std::atan2(robot_.goal.y - robot_.position.y,
                              robot_.goal.x - robot_.position.x);

  std::vector<AgentState> humans;
  humans.reserve(static_cast<std::size_t>(config_.max_humans));
  for (int i = 0; i < config_.max_humans; ++i) {
    AgentState h;
    if (config_.randomize_traits) {
      h.v_max = uniform(rng, 0.5, 1.5);
      h.radius = uniform(rng, 0.3, 0.5);
    } else {
      h.v_max = config_.human_v_max;
      h.radius = config_.human_radius;
    }
    h.position = place(h.radius);
    h.goal = random_point();
    humans.push_back(h);
  }
  crowd_ = Crowd(std::move(humans), derive_seed(seed, 1), config_);

  steps_ = 0;
  active_ = true;
  done_ = false;
  cumulative_reward_ = 0.0;
  outcome_.reset();
  history_.assign(static_cast<std::size_t>(config_.max_humans), {});
  refresh_sensing(true);
  refresh_futures();
  return observe();
}

void Environment::refresh_sensing(bool append_history) {
  const auto& humans = crowd_.humans();
  visible_.assign(humans.size(), false);
  for (std::size_t i = 0; i < humans.size(); ++i) {
    visible_[i] = distance(robot_.position, humans[i].position) <= config_.sensor_range;
    if (append_history) {
      history_[i].push(humans[i].position, visible_[i], config_.history_steps + 1);
    }
  }
}

void Environment::refresh_futures() {
  futures_.clear();
  futures_ = ground_truth_futures(std::max(config_.horizon(), kIntrusionHorizon));
}

StepResult Environment::step(const Vec2& action) {
  if (!active_ || done_) throw std::logic_error("step() called on a finished or unstarted episode");
  if (!is_finite(action)) throw std::invalid_argument("action must be finite");

  const double d_prev = distance(robot_.position, robot_.goal);

  robot_.velocity = clamp_norm(action, robot_.v_max);
  update_heading(robot_);
  crowd_.advance();
  robot_.position += robot_.velocity * config_.dt;
  ++steps_;

  refresh_sensing(true);
  refresh_futures();

  const auto& humans = crowd_.humans();
  reward::RewardContext ctx;
  ctx.robot = {robot_.position, robot_.radius};
  ctx.d_goal_prev = d_prev;
  ctx.d_goal_cur = distance(robot_.position, robot_.goal);
  const int horizon = config_.horizon();
  ctx.humans.reserve(humans.size());
  ctx.futures.resize(humans.size());
  bool collided = false;
  for (std::size_t i = 0; i < humans.size(); ++i) {
    ctx.humans.push_back({humans[i].position, humans[i].radius});
    collided = collided ||
               discs_overlap(robot_.position, robot_.radius, humans[i].position, humans[i].radius);
    for (int k = 0; k < horizon; ++k) {
      ctx.futures[i].push_back({futures_[i][static_cast<std::size_t>(k)], humans[i].radius});
    }
  }
  // A collision on the step that also reaches the goal counts as a collision.
  ctx.collided = collided;
  ctx.reached_goal = !collided && ctx.d_goal_cur < robot_.radius;

  StepResult result;
  result.reward = reward::full_reward(ctx);
  cumulative_reward_ += result.reward;

  std::optional<OutcomeKind> kind;
  if (ctx.collided) {
    kind = OutcomeKind::Collision;
  } else if (ctx.reached_goal) {
    kind = OutcomeKind::ReachedGoal;
  } else if (steps_ >= config_.max_steps) {
    kind = OutcomeKind::Timeout;
  }
  if (kind) {
    done_ = true;
    outcome_ = EpisodeOutcome{*kind, steps_, cumulative_reward_};
  }
  result.done = done_;
  result.outcome = outcome_;
  result.observation = observe();
  return result;
}

Observation Environment::observe() const {
  Observation obs;
  obs.robot = robot_;
  const auto& humans = crowd_.humans();
  obs.visible = visible_;
  obs.humans.resize(humans.size());

  const int horizon = config_.horizon();
  predict::PredictedZones zones;
  if (horizon > 0 && predictor_) {
    zones = predictor_->predict(history_, *this, visible_, config_.dt, horizon);
  }
  for (std::size_t i = 0; i < humans.size(); ++i) {
    if (!visible_[i]) continue;
    auto& slot = obs.humans[i];
    slot.position = humans[i].position;
    slot.predicted.resize(static_cast<std::size_t>(horizon));
    for (int k = 0; k < horizon; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      // Predictors that come up short (too little history) repeat the current position.
      slot.predicted[kk] = (i < zones.size() && kk < zones[i].size()) ? zones[i][kk].center
                                                                     : humans[i].position;
    }
  }
  return obs;
}

std::vector<std::vector<Vec2>> Environment::ground_truth_futures(int horizon) const {
  const auto& humans = crowd_.humans();
  std::vector<std::vector<Vec2>> futures(humans.size());
  if (horizon <= 0) return futures;
  // Reuse the cached roll when it is long enough.
  if (!futures_.empty() && futures_.size() == humans.size() &&
      (humans.empty() || futures_[0].size() >= static_cast<std::size_t>(horizon))) {
    for (std::size_t i = 0; i < humans.size(); ++i) {
      futures[i].assign(futures_[i].begin(), futures_[i].begin() + horizon);
    }
    return futures;
  }
  Crowd clone = crowd_;
  for (int k = 0; k < horizon; ++k) {
    clone.advance();
    for (std::size_t i = 0; i < humans.size(); ++i) futures[i].push_back(clone.humans()[i].position);
  }
  return futures;
}

std::vector<Vec2> Environment::positions_after(int k) const {
  Crowd clone = crowd_;
  for (int s = 0; s < k; ++s) clone.advance();
  std::vector<Vec2> out;
  out.reserve(clone.humans().size());
  for (const auto& h : clone.humans()) out.push_back(h.position);
  return out;
}

void Environment::set_human(std::size_t index, const AgentState& human) {
  crowd_.humans().at(index) = human;
  history_.at(index) = {};
  refresh_sensing(false);
  if (visible_[index]) history_[index].push(human.position, true, config_.history_steps + 1);
  refresh_futures();
}

void Environment::set_robot(const AgentState& robot) {
  robot_ = robot;
  refresh_sensing(false);
  refresh_futures();
}

}  // namespace crowdnav
