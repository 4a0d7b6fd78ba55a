#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crowdnav/agent.hpp"
#include "crowdnav/sim.hpp"

namespace crowdnav {

struct HumanFrame {
  int id = 0;
  Vec2 position;
  Vec2 velocity;
  double radius = 0.3;
  bool visible = false;
  /// Predicted positions the robot saw for this human (empty when invisible).
  std::vector<Vec2> predicted;
};

/// One logged state. Frame 0 is the reset state; frame t > 0 follows the t-th action.
struct StepFrame {
  int t = 0;
  AgentState robot;
  std::vector<HumanFrame> humans;
  std::optional<Vec2> action;  // applied (clamped) velocity that produced this frame
  double reward = 0.0;
  /// gt_futures[i][k-1]: true position of human i after k more steps.
  std::vector<std::vector<Vec2>> gt_futures;
  bool done = false;
  std::optional<OutcomeKind> outcome;
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  double dt = 0.25;
  double sensor_range = 5.0;
  double arena_half_width = 6.0;
  std::vector<StepFrame> frames;

  /// Number of actions taken (frames after the reset frame).
  int step_count() const { return frames.empty() ? 0 : static_cast<int>(frames.size()) - 1; }
  /// Outcome of the final frame; Timeout when the log ends without one.
  OutcomeKind outcome() const;
};

/// JSONL: one object per frame,
///   {t, robot:{px,py,vx,vy,gx,gy,r}, humans:[{id,px,py,vx,vy,r,visible,pred}],
///    action, reward, gt_futures, done, outcome}
/// Frame 0 additionally carries meta:{seed, dt, sensor_range, arena_half_width}.
void write_episode_jsonl(std::ostream& out, const EpisodeRecord& record);
void write_episode_jsonl(const std::filesystem::path& path, const EpisodeRecord& record);

/// Throws std::runtime_error on malformed or empty input.
EpisodeRecord read_episode_jsonl(std::istream& in);
EpisodeRecord read_episode_jsonl(const std::filesystem::path& path);

}  // namespace crowdnav
