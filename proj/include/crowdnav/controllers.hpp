#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include "crowdnav/orca.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/sim.hpp"
#include "crowdnav/social_force.hpp"

namespace crowdnav {

/// Robot decision rule driven by the evaluation loop. One instance per episode
/// stream; instances are not shared between threads.
class Controller {
 public:
  virtual ~Controller() = default;
  /// Called before each episode.
  virtual void reset(std::uint64_t /*episode_seed*/) {}
  /// Velocity command for the current state; the environment clamps it.
  virtual Vec2 act(const Environment& env, const Observation& obs) = 0;
};

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

/// States of the humans the robot currently senses.
std::vector<AgentState> sensed_humans(const Environment& env);

/// ORCA robot that plans against sensed humans (which do not reciprocate).
class OrcaController final : public Controller {
 public:
  explicit OrcaController(orca::OrcaParams params = {}) : params_(params) {}
  Vec2 act(const Environment& env, const Observation& obs) override;

 private:
  orca::OrcaParams params_;
};

class SocialForceController final : public Controller {
 public:
  explicit SocialForceController(sf::SfParams params = {}) : params_(params) {}
  Vec2 act(const Environment& env, const Observation& obs) override;

 private:
  sf::SfParams params_;
};

/// Uniformly random velocity in the robot's speed disc.
class RandomController final : public Controller {
 public:
  void reset(std::uint64_t episode_seed) override;
  Vec2 act(const Environment& env, const Observation& obs) override;

 private:
  std::mt19937_64 rng_{0};
};

/// Never moves.
class StationaryController final : public Controller {
 public:
  Vec2 act(const Environment&, const Observation&) override { return {}; }
};

/// Learned policy; keeps the recurrent state across steps of one episode.
/// Deterministic mode executes the Gaussian mean.
class PolicyController final : public Controller {
 public:
  PolicyController(std::shared_ptr<const policy::PolicyNet> net, bool deterministic);
  void reset(std::uint64_t episode_seed) override;
  Vec2 act(const Environment& env, const Observation& obs) override;

 private:
  std::shared_ptr<const policy::PolicyNet> net_;
  bool deterministic_;
  ad::Matrix hidden_;
  std::mt19937_64 rng_{0};
};

/// Factory for a named baseline: "orca", "sf", "random" or "stationary".
ControllerFactory baseline_factory(const std::string& name, const orca::OrcaParams& orca_params,
                                   const sf::SfParams& sf_params);

}  // namespace crowdnav
