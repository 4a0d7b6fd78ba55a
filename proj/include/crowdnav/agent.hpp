#pragma once

#include "crowdnav/geometry.hpp"

namespace crowdnav {

/// Full kinematic state of one disc agent (robot or human).
struct AgentState {
  Vec2 position;
  Vec2 velocity;
  Vec2 goal;
  double v_max = 1.0;
  double heading = 0.0;
  double radius = 0.3;

  bool operator==(const AgentState&) const = default;
};

/// Strict disc overlap; touching discs do not overlap.
inline bool discs_overlap(const Vec2& a, double ra, const Vec2& b, double rb) {
  return distance(a, b) < ra + rb;
}

/// Velocity that heads to the goal at v_max, or covers the remaining
/// displacement exactly in one step when the goal is closer than that.
inline Vec2 preferred_velocity(const AgentState& agent, double dt) {
  const Vec2 to_goal = agent.goal - agent.position;
  const double dist = norm(to_goal);
  if (dist == 0.0) return {};
  if (dist <= agent.v_max * dt) return to_goal / dt;
  return to_goal * (agent.v_max / dist);
}

}  // namespace crowdnav
