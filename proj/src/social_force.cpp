#include "crowdnav/social_force.hpp"

#include <cmath>

namespace crowdnav::sf {

Vec2 driving_force(const AgentState& self, const SfParams& params, double dt) {
  const Vec2 desired = preferred_velocity(self, dt);
  return (desired - self.velocity) / params.relaxation_time;
}

Vec2 repulsive_force(const AgentState& self, const AgentState& other, const SfParams& params) {
  const Vec2 offset = self.position - other.position;
  const double dist = norm(offset);
  const Vec2 direction = dist > 0.0 ? offset / dist : Vec2{1.0, 0.0};
  const double magnitude = params.repulsion_strength *
                           std::exp((self.radius + other.radius - dist) / params.repulsion_range);
  return magnitude * direction;
}

Vec2 sf_velocity(const AgentState& self, std::span<const AgentState> neighbors,
                 const SfParams& params, double dt) {
  Vec2 force = driving_force(self, params, dt);
  for (const auto& other : neighbors) force += repulsive_force(self, other, params);
  return clamp_norm(self.velocity + force * dt, self.v_max);
}

}  // namespace crowdnav::sf
