#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "crowdnav/agent.hpp"
#include "crowdnav/orca.hpp"
#include "crowdnav/predict.hpp"

namespace crowdnav {

/// Future horizon used for intrusion bookkeeping in episode logs and metrics.
inline constexpr int kIntrusionHorizon = 5;

struct SimConfig {
  double arena_half_width = 6.0;
  double sensor_range = 5.0;
  int max_humans = 20;
  double dt = 0.25;
  int max_steps = 200;
  bool randomize_traits = true;
  double goal_change_prob = 0.01;
  std::uint64_t rng_seed = 0;

  double robot_radius = 0.3;
  double robot_v_max = 1.0;
  /// Human traits used when randomize_traits is false.
  double human_radius = 0.3;
  double human_v_max = 1.0;

  predict::PredictorKind predictor = predict::PredictorKind::ConstVel;
  int prediction_steps = 5;  // K
  int history_steps = 5;     // M
  double zone_radius = 0.3;

  orca::OrcaParams human_orca;

  /// Number of predicted positions per human in observations; 0 without a predictor.
  int horizon() const {
    return predictor == predict::PredictorKind::None ? 0 : prediction_steps;
  }
  void validate() const;
};

enum class OutcomeKind { ReachedGoal, Collision, Timeout };

std::string_view to_string(OutcomeKind kind);
OutcomeKind parse_outcome_kind(std::string_view name);

struct EpisodeOutcome {
  OutcomeKind kind = OutcomeKind::Timeout;
  int step_count = 0;
  double cumulative_reward = 0.0;
};

struct HumanObservation {
  Vec2 position;
  std::vector<Vec2> predicted;

  bool operator==(const HumanObservation&) const = default;
};

/// What the robot perceives. `humans` and `visible` have one slot per
/// configured human; masked slots are zero-filled.
struct Observation {
  AgentState robot;
  std::vector<HumanObservation> humans;
  std::vector<bool> visible;

  bool operator==(const Observation&) const = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  std::optional<EpisodeOutcome> outcome;
};

/// The human crowd: ORCA agents that react only to each other, with their own
/// random stream for goal changes so a copy can be rolled forward to obtain
/// exact futures.
class Crowd {
 public:
  Crowd() = default;
  Crowd(std::vector<AgentState> humans, std::uint64_t seed, const SimConfig& config);

  /// One synchronous ORCA update followed by goal bookkeeping.
  void advance();

  const std::vector<AgentState>& humans() const { return humans_; }
  std::vector<AgentState>& humans() { return humans_; }

 private:
  Vec2 random_point();

  std::vector<AgentState> humans_;
  std::mt19937_64 rng_;
  double half_width_ = 6.0;
  double dt_ = 0.25;
  bool randomize_ = false;
  double goal_change_prob_ = 0.0;
  orca::OrcaParams params_;
};

/// Episodic crowd-navigation environment. Single-threaded; independent
/// instances share nothing.
class Environment final : public predict::GroundTruthSource {
 public:
  explicit Environment(SimConfig config);

  Observation reset(std::uint64_t seed);
  Observation reset(const SimConfig& config, std::uint64_t seed);
  StepResult step(const Vec2& action);
  Observation observe() const;

  std::vector<std::vector<Vec2>> ground_truth_futures(int horizon) const override;
  /// Human positions after k steps with the robot frozen; k = 0 gives the current ones.
  std::vector<Vec2> positions_after(int k) const;

  void set_predictor(std::shared_ptr<const predict::Predictor> predictor);

  const SimConfig& config() const { return config_; }
  const AgentState& robot() const { return robot_; }
  const std::vector<AgentState>& humans() const { return crowd_.humans(); }
  const std::vector<bool>& visibility() const { return visible_; }
  const predict::TrajectoryHistory& history() const { return history_; }
  /// True futures at kIntrusionHorizon (or the prediction horizon if longer) for the current state.
  const std::vector<std::vector<Vec2>>& cached_futures() const { return futures_; }
  int step_count() const { return steps_; }
  bool done() const { return done_; }
  double cumulative_reward() const { return cumulative_reward_; }
  const std::optional<EpisodeOutcome>& outcome() const { return outcome_; }

  /// Overwrites one human's state; intended for tests and scripted scenes.
  /// Visibility, histories and futures are refreshed.
  void set_human(std::size_t index, const AgentState& human);
  void set_robot(const AgentState& robot);

 private:
  void refresh_sensing(bool append_history);
  void refresh_futures();

  SimConfig config_;
  std::shared_ptr<const predict::Predictor> predictor_;
  AgentState robot_;
  Crowd crowd_;
  std::vector<bool> visible_;
  predict::TrajectoryHistory history_;
  std::vector<std::vector<Vec2>> futures_;
  int steps_ = 0;
  bool active_ = false;
  bool done_ = false;
  double cumulative_reward_ = 0.0;
  std::optional<EpisodeOutcome> outcome_;
};

}  // namespace crowdnav
