#pragma once

#include <span>
#include <vector>

#include "crowdnav/agent.hpp"

namespace crowdnav::orca {

/// Closed half-plane in velocity space: v is permitted iff
/// dot(v - point, normal) >= 0.
struct HalfPlane {
  Vec2 point;
  Vec2 normal;

  /// Signed distance of v into the permitted side (negative when violated).
  double margin(const Vec2& v) const { return dot(v - point, normal); }
  /// Boundary direction with the permitted side on its left.
  Vec2 direction() const { return {normal.y, -normal.x}; }
};

struct OrcaParams {
  double time_horizon = 5.0;
  double neighbor_dist = 10.0;
  int max_neighbors = 10;
};

/// Reciprocal constraint that `self` adopts with respect to `other`.
/// Overlapping agents get a push-apart constraint built over one time step.
HalfPlane orca_halfplane(const AgentState& self, const AgentState& other, double time_horizon,
                         double dt);

/// Velocity inside |v| <= v_max closest to `preferred` that satisfies every
/// constraint. When the constraints are infeasible, returns the velocity
/// minimizing the largest violation.
Vec2 linear_program_2d(std::span<const HalfPlane> constraints, const Vec2& preferred,
                       double v_max);

/// Collision-avoiding velocity for `self` among `neighbors`.
Vec2 orca_velocity(const AgentState& self, std::span<const AgentState> neighbors,
                   const OrcaParams& params, double dt);

}  // namespace crowdnav::orca
