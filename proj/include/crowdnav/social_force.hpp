#pragma once

#include <span>

#include "crowdnav/agent.hpp"

namespace crowdnav::sf {

struct SfParams {
  double relaxation_time = 0.5;    // s
  double repulsion_strength = 2.0; // A, m/s^2
  double repulsion_range = 0.5;    // B, m
};

/// Goal-attraction acceleration (desired - current velocity) / relaxation_time.
Vec2 driving_force(const AgentState& self, const SfParams& params, double dt);

/// Exponential repulsion exerted on `self` by `other`, along other -> self.
/// Coincident centers push along +x.
Vec2 repulsive_force(const AgentState& self, const AgentState& other, const SfParams& params);

/// Velocity after integrating the total social force over dt, clamped to v_max.
Vec2 sf_velocity(const AgentState& self, std::span<const AgentState> neighbors,
                 const SfParams& params, double dt);

}  // namespace crowdnav::sf
