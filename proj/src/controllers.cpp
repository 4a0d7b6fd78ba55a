#include "crowdnav/controllers.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace crowdnav {

std::vector<AgentState> sensed_humans(const Environment& env) {
  std::vector<AgentState> out;
  const auto& humans = env.humans();
  const auto& visible = env.visibility();
  for (std::size_t i = 0; i < humans.size(); ++i) {
    if (visible[i]) out.push_back(humans[i]);
  }
  return out;
}

Vec2 OrcaController::act(const Environment& env, const Observation&) {
  const auto neighbors = sensed_humans(env);
  return orca::orca_velocity(env.robot(), neighbors, params_, env.config().dt);
}

Vec2 SocialForceController::act(const Environment& env, const Observation&) {
  const auto neighbors = sensed_humans(env);
  return sf::sf_velocity(env.robot(), neighbors, params_, env.config().dt);
}

void RandomController::reset(std::uint64_t episode_seed) { rng_.seed(episode_seed ^ 0x5eedULL); }

Vec2 RandomController::act(const Environment& env, const Observation&) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = env.robot().v_max * std::sqrt(unit(rng_));
  const double theta = 2.0 * std::numbers::pi * unit(rng_);
  return {r * std::cos(theta), r * std::sin(theta)};
}

PolicyController::PolicyController(std::shared_ptr<const policy::PolicyNet> net,
                                   bool deterministic)
    : net_(std::move(net)), deterministic_(deterministic), hidden_(net_->initial_state()) {}

void PolicyController::reset(std::uint64_t episode_seed) {
  hidden_ = net_->initial_state();
  rng_.seed(episode_seed ^ 0xac7104ULL);
}

Vec2 PolicyController::act(const Environment&, const Observation& obs) {
  const auto out = net_->forward(obs, hidden_);
  hidden_ = out.h_next;
  if (deterministic_) return out.action_mean;
  return policy::sample_action(out, rng_).first;
}

ControllerFactory baseline_factory(const std::string& name, const orca::OrcaParams& orca_params,
                                   const sf::SfParams& sf_params) {
  if (name == "orca") {
    return [orca_params] { return std::make_unique<OrcaController>(orca_params); };
  }
  if (name == "sf") {
    return [sf_params] { return std::make_unique<SocialForceController>(sf_params); };
  }
  if (name == "random") return [] { return std::make_unique<RandomController>(); };
  if (name == "stationary") return [] { return std::make_unique<StationaryController>(); };
  throw std::invalid_argument("unknown baseline '" + name + "' (expected orca, sf, random)");
}

}  // namespace crowdnav
