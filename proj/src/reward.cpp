#include "crowdnav/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crowdnav::reward {

bool intrusion_indicator(const Disc& robot, const Disc& zone) {
  return distance(robot.center, zone.center) < robot.radius + zone.radius;
}

double prediction_reward(const RewardContext& ctx, double collision_penalty, int horizon) {
  double worst = 0.0;
  for (const auto& future : ctx.futures) {
    const int steps = std::min<int>(horizon, static_cast<int>(future.size()));
    // r_c / 2^k is negative and increasing in k, so the earliest hit dominates.
    for (int k = 1; k <= steps; ++k) {
      if (intrusion_indicator(ctx.robot, future[static_cast<std::size_t>(k - 1)])) {
        worst = std::min(worst, std::ldexp(collision_penalty, -k));
        break;
      }
    }
  }
  return worst;
}

double potential_reward(double d_prev, double d_cur) { return 2.0 * (d_prev - d_cur); }

double full_reward(const RewardContext& ctx) {
  if (ctx.reached_goal && ctx.collided) {
    throw std::invalid_argument("reward context has both reached_goal and collided set");
  }
  if (ctx.reached_goal) return kGoalReward;
  if (ctx.collided) return kCollisionPenalty;
  int horizon = 0;
  for (const auto& f : ctx.futures) horizon = std::max(horizon, static_cast<int>(f.size()));
  return potential_reward(ctx.d_goal_prev, ctx.d_goal_cur) +
         prediction_reward(ctx, kCollisionPenalty, horizon);
}

}  // namespace crowdnav::reward
