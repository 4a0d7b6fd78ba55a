#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crowdnav/social_force.hpp"

namespace crowdnav {
namespace {

AgentState agent(Vec2 p, Vec2 v = {}, Vec2 goal = {}, double r = 0.3) {
  AgentState a;
  a.position = p;
  a.velocity = v;
  a.goal = goal;
  a.radius = r;
  return a;
}

TEST(SocialForce, AtGoalAtRestStaysPut) {
  const auto self = agent({1, 2}, {}, {1, 2});
  const std::vector<AgentState> none;
  const Vec2 v = sf::sf_velocity(self, none, {}, 0.25);
  EXPECT_EQ(v, Vec2(0.0, 0.0));
}

TEST(SocialForce, DistantNeighborLeavesDesiredVelocity) {
  // Already moving at the desired velocity, so the driving term vanishes too.
  const auto self = agent({0, 0}, {1, 0}, {10, 0});
  const auto other = agent({0, 50});
  const sf::SfParams params;
  const Vec2 f = sf::repulsive_force(self, other, params);
  EXPECT_LT(norm(f), 1e-20);
  const std::vector<AgentState> n{other};
  const Vec2 v = sf::sf_velocity(self, n, params, 0.25);
  EXPECT_NEAR(v.x, 1.0, 1e-9);
  EXPECT_NEAR(v.y, 0.0, 1e-9);
}

TEST(SocialForce, RepulsionMatchesClosedForm) {
  const auto self = agent({0, 0});
  const auto other = agent({1.1, 0}, {}, {}, 0.4);
  const sf::SfParams params;  // A = 2, B = 0.5
  const Vec2 f = sf::repulsive_force(self, other, params);
  const double expected = 2.0 * std::exp((0.7 - 1.1) / 0.5);
  EXPECT_NEAR(f.x, -expected, 1e-15);
  EXPECT_EQ(f.y, 0.0);
}

TEST(SocialForce, SymmetricPairForcesAreOpposite) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int n = 0; n < 100; ++n) {
    const auto a = agent({u(rng), u(rng)});
    const auto b = agent({u(rng), u(rng)});
    const Vec2 fa = sf::repulsive_force(a, b, {});
    const Vec2 fb = sf::repulsive_force(b, a, {});
    EXPECT_NEAR(fa.x, -fb.x, 1e-12);
    EXPECT_NEAR(fa.y, -fb.y, 1e-12);
    EXPECT_NEAR(norm(fa), norm(fb), 1e-12);
  }
}

TEST(SocialForce, CoincidentCentersPushAlongX) {
  const auto a = agent({1, 1});
  const Vec2 f = sf::repulsive_force(a, a, {});
  EXPECT_GT(f.x, 0.0);
  EXPECT_EQ(f.y, 0.0);
  EXPECT_TRUE(is_finite(sf::sf_velocity(a, std::vector<AgentState>{a}, {}, 0.25)));
}

TEST(SocialForce, RepulsionDecreasesWithDistance) {
  const auto self = agent({0, 0});
  double previous = 1e300;
  for (double d = 0.1; d < 8.0; d += 0.05) {
    const double m = norm(sf::repulsive_force(self, agent({d, 0}), {}));
    EXPECT_LT(m, previous) << d;
    previous = m;
  }
}

TEST(SocialForce, OutputRespectsSpeedLimit) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int n = 0; n < 500; ++n) {
    auto self = agent({u(rng), u(rng)}, {u(rng) / 3, u(rng) / 3}, {u(rng), u(rng)});
    self.v_max = 0.5 + std::abs(u(rng)) / 3.0;
    self.velocity = clamp_norm(self.velocity, self.v_max);
    std::vector<AgentState> others;
    for (int k = 0; k < 4; ++k) others.push_back(agent({u(rng), u(rng)}));
    const Vec2 v = sf::sf_velocity(self, others, {}, 0.25);
    EXPECT_TRUE(is_finite(v));
    EXPECT_LE(norm(v), self.v_max + 1e-9);
  }
}

TEST(SocialForce, DrivingForceRelaxesTowardDesired) {
  const auto self = agent({0, 0}, {0, 0.5}, {10, 0});
  const Vec2 f = sf::driving_force(self, {}, 0.25);
  EXPECT_NEAR(f.x, (1.0 - 0.0) / 0.5, 1e-12);
  EXPECT_NEAR(f.y, (0.0 - 0.5) / 0.5, 1e-12);
}

}  // namespace
}  // namespace crowdnav
