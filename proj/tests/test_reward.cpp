#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "crowdnav/reward.hpp"

namespace crowdnav::reward {
namespace {

// Places human i's k-th future disc so the robot (at the origin, r = 0.3)
// intrudes it exactly at the listed steps.
RewardContext context_with_hits(const std::vector<std::vector<int>>& hits, int horizon) {
  RewardContext ctx;
  ctx.robot = {{0, 0}, 0.3};
  for (std::size_t i = 0; i < hits.size(); ++i) {
    ctx.humans.push_back({{5.0 + i, 0}, 0.3});
    std::vector<Disc> future;
    for (int k = 1; k <= horizon; ++k) {
      const bool hit = std::find(hits[i].begin(), hits[i].end(), k) != hits[i].end();
      future.push_back({hit ? Vec2{0.2, 0.0} : Vec2{4.0, 0.0}, 0.3});
    }
    ctx.futures.push_back(future);
  }
  return ctx;
}

TEST(IntrusionIndicator, StrictOverlap) {
  EXPECT_TRUE(intrusion_indicator({{0, 0}, 0.3}, {{0.55, 0}, 0.3}));
  EXPECT_FALSE(intrusion_indicator({{0, 0}, 0.3}, {{0.60, 0}, 0.3}));
  EXPECT_FALSE(intrusion_indicator({{0, 0}, 0.3}, {{10, 0}, 0.3}));
}

TEST(PredictionReward, EarliestStepOfOneHuman) {
  const auto ctx = context_with_hits({{2, 4}}, 5);
  EXPECT_EQ(prediction_reward(ctx, -20.0, 5), -5.0);
}

TEST(PredictionReward, NoIntrusionIsZero) {
  const auto ctx = context_with_hits({{}, {}}, 5);
  EXPECT_EQ(prediction_reward(ctx, -20.0, 5), 0.0);
}

TEST(PredictionReward, MinimumAcrossHumans) {
  const auto ctx = context_with_hits({{1}, {3}}, 5);
  EXPECT_EQ(prediction_reward(ctx, -20.0, 5), -10.0);
}

TEST(PredictionReward, HorizonTruncatesFutures) {
  const auto ctx = context_with_hits({{4}}, 5);
  EXPECT_EQ(prediction_reward(ctx, -20.0, 3), 0.0);
  EXPECT_EQ(prediction_reward(ctx, -20.0, 4), -20.0 / 16.0);
}

TEST(PotentialReward, Examples) {
  EXPECT_DOUBLE_EQ(potential_reward(5.0, 4.5), 1.0);
  EXPECT_EQ(potential_reward(3.0, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(potential_reward(4.5, 5.0), -1.0);
}

TEST(FullReward, Branches) {
  auto ctx = context_with_hits({{2, 4}}, 5);
  ctx.d_goal_prev = 5.0;
  ctx.d_goal_cur = 4.5;
  EXPECT_DOUBLE_EQ(full_reward(ctx), -4.0);
  ctx.reached_goal = true;
  EXPECT_EQ(full_reward(ctx), 10.0);
  ctx.reached_goal = false;
  ctx.collided = true;
  EXPECT_EQ(full_reward(ctx), -20.0);
  ctx.reached_goal = true;
  EXPECT_THROW(full_reward(ctx), std::invalid_argument);
}

TEST(PredictionReward, RandomContextsMatchBruteForce) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  std::uniform_real_distribution<double> rad(0.3, 0.5);
  std::uniform_int_distribution<int> n_humans(0, 6);
  for (int n = 0; n < 2000; ++n) {
    RewardContext ctx;
    ctx.robot = {{pos(rng), pos(rng)}, 0.3};
    const int m = n_humans(rng);
    for (int i = 0; i < m; ++i) {
      const double r = rad(rng);
      ctx.humans.push_back({{pos(rng), pos(rng)}, r});
      std::vector<Disc> future;
      for (int k = 0; k < 5; ++k) future.push_back({{pos(rng), pos(rng)}, r});
      ctx.futures.push_back(future);
    }
    double brute = 0.0;
    for (const auto& f : ctx.futures) {
      for (int k = 1; k <= 5; ++k) {
        const double ind = intrusion_indicator(ctx.robot, f[k - 1]) ? 1.0 : 0.0;
        brute = std::min(brute, ind * (-20.0 / std::pow(2.0, k)));
      }
    }
    EXPECT_EQ(prediction_reward(ctx, -20.0, 5), brute);
  }
}

}  // namespace
}  // namespace crowdnav::reward
