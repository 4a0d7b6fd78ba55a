#pragma once

#include <vector>

#include "crowdnav/geometry.hpp"

namespace crowdnav::reward {

inline constexpr double kGoalReward = 10.0;
inline constexpr double kCollisionPenalty = -20.0;

using crowdnav::Disc;

/// Everything the reward needs about one transition.
struct RewardContext {
  Disc robot;
  std::vector<Disc> humans;
  /// futures[i][k-1] is human i's disc k steps ahead.
  std::vector<std::vector<Disc>> futures;
  double d_goal_prev = 0.0;
  double d_goal_cur = 0.0;
  bool reached_goal = false;
  bool collided = false;
};

/// True when the discs strictly overlap; boundary contact is not an intrusion.
bool intrusion_indicator(const Disc& robot, const Disc& zone);

/// Most negative discounted intrusion penalty r_c / 2^k over all humans and
/// future steps 1..horizon; 0 when nothing is intruded.
double prediction_reward(const RewardContext& ctx, double collision_penalty, int horizon);

/// Potential shaping 2 * (d_prev - d_cur).
double potential_reward(double d_prev, double d_cur);

/// Terminal rewards when a terminal flag is set, otherwise potential plus
/// prediction reward over the context's futures. Throws std::invalid_argument
/// when both terminal flags are set.
double full_reward(const RewardContext& ctx);

}  // namespace crowdnav::reward
