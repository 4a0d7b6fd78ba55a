#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "crowdnav/policy.hpp"
#include "support.hpp"

namespace crowdnav::policy {
namespace {

using ad::Matrix;
using ad::Tensor;
using testing::random_matrix;

PolicyConfig small_config(int horizon = 2, int slots = 4) {
  PolicyConfig c;
  c.horizon = horizon;
  c.max_humans = slots;
  c.d_hh = 8;
  c.hh_heads = 2;
  c.d_rh = 6;
  c.d_r = 5;
  c.d_h = 7;
  c.init_log_std = -0.5;
  return c;
}

Observation random_observation(std::mt19937_64& rng, int slots, int horizon) {
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::bernoulli_distribution coin(0.6);
  Observation obs;
  obs.robot.position = {u(rng), u(rng)};
  obs.robot.velocity = {u(rng) / 4, u(rng) / 4};
  obs.robot.goal = {u(rng), u(rng)};
  obs.robot.heading = u(rng);
  obs.humans.resize(static_cast<std::size_t>(slots));
  obs.visible.resize(static_cast<std::size_t>(slots));
  for (int i = 0; i < slots; ++i) {
    const auto s = static_cast<std::size_t>(i);
    obs.visible[s] = coin(rng);
    if (!obs.visible[s]) continue;
    obs.humans[s].position = {u(rng), u(rng)};
    for (int k = 0; k < horizon; ++k) obs.humans[s].predicted.push_back({u(rng), u(rng)});
  }
  return obs;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_output(const PolicyOutput& a, const PolicyOutput& b) {
  bool same = same_bits(a.value, b.value) && same_bits(a.action_mean.x, b.action_mean.x) &&
              same_bits(a.action_mean.y, b.action_mean.y) &&
              same_bits(a.action_log_std.first, b.action_log_std.first) &&
              same_bits(a.action_log_std.second, b.action_log_std.second);
  for (std::size_t i = 0; i < a.h_next.size(); ++i) same = same && same_bits(a.h_next[i], b.h_next[i]);
  return same;
}

TEST(Features, RowWidthAndMasking) {
  PolicyConfig c;
  EXPECT_EQ(c.feature_width(), 12u);
  std::mt19937_64 rng(1);
  auto obs = random_observation(rng, 6, 5);
  obs.visible[2] = false;
  obs.humans[2] = {};
  const auto [features, mask] = build_human_features(obs, 5);
  EXPECT_EQ(features.cols(), 12u);
  EXPECT_FALSE(mask[2]);
  for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(features(2, j), 0.0);
}

TEST(Features, RobotCentric) {
  Observation obs;
  obs.robot.position = {1, 2};
  obs.robot.goal = {4, 6};
  obs.robot.velocity = {0.5, 0};
  obs.humans = {{{2, 2}, {{3, 2}}}};
  obs.visible = {true};
  const auto [features, mask] = build_human_features(obs, 1);
  EXPECT_EQ(features(0, 0), 1.0);
  EXPECT_EQ(features(0, 1), 0.0);
  EXPECT_EQ(features(0, 2), 2.0);
  const Matrix robot = build_robot_features(obs.robot);
  EXPECT_EQ(robot(0, 0), 0.0);
  EXPECT_EQ(robot(0, 4), 3.0);
  EXPECT_EQ(robot(0, 5), 4.0);
}

TEST(Features, TranslationInvariance) {
  std::mt19937_64 rng(2);
  for (int n = 0; n < 50; ++n) {
    const auto obs = random_observation(rng, 5, 3);
    auto moved = obs;
    const Vec2 shift{3, 3};
    moved.robot.position += shift;
    moved.robot.goal += shift;
    for (auto& h : moved.humans) {
      h.position += shift;
      for (auto& p : h.predicted) p += shift;
    }
    const auto a = make_input(obs, 3);
    const auto b = make_input(moved, 3);
    for (std::size_t i = 0; i < a.humans.size(); ++i) EXPECT_NEAR(a.humans[i], b.humans[i], 1e-12);
    EXPECT_EQ(a.robot, b.robot);
    EXPECT_EQ(a.mask, b.mask);
  }
}

class PolicyTest : public ::testing::Test {
 protected:
  PolicyNet net{small_config()};
  std::vector<Tensor> params = net.parameters().bind(nullptr);
};

TEST_F(PolicyTest, SingleVisibleHumanAttendsToItself) {
  std::mt19937_64 rng(3);
  const Matrix f = random_matrix(4, 6, rng);
  const std::vector<bool> mask = {false, true, false, false};
  const auto hh = net.hh_attention(params, Tensor(f), mask);
  for (const auto& w : hh.weights) {
    EXPECT_EQ(w(1, 1), 1.0);
    EXPECT_EQ(w(1, 0), 0.0);
    EXPECT_EQ(w(0, 1), 0.0);
  }
  // Mixed row = the human's own value projection.
  const Matrix v = ad::matmul(Tensor(f), params[PolicyNet::kHhValue]).value();
  for (std::size_t j = 0; j < v.cols(); ++j) EXPECT_DOUBLE_EQ(hh.mixed(1, j), v(1, j));
}

TEST_F(PolicyTest, MaskEquivalenceWithSingleHuman) {
  std::mt19937_64 rng(4);
  for (int n = 0; n < 20; ++n) {
    const Matrix f = random_matrix(4, 6, rng);
    Matrix only = Matrix(4, 6);
    for (std::size_t j = 0; j < 6; ++j) only(2, j) = f(2, j);
    const std::vector<bool> mask = {false, false, true, false};
    const auto a = net.hh_attention(params, Tensor(f), mask);
    const auto b = net.hh_attention(params, Tensor(only), mask);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(a.output(2, j), b.output(2, j));
  }
}

TEST_F(PolicyTest, IdenticalRowsGetUniformWeights) {
  std::mt19937_64 rng(5);
  const Matrix row = random_matrix(1, 6, rng);
  Matrix f(4, 6);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 6; ++j) f(i, j) = row(0, j);
  }
  const std::vector<bool> mask = {true, true, false, true};
  const auto hh = net.hh_attention(params, Tensor(f), mask);
  for (const auto& w : hh.weights) {
    for (std::size_t i : {0u, 1u, 3u}) {
      for (std::size_t j : {0u, 1u, 3u}) EXPECT_NEAR(w(i, j), 1.0 / 3.0, 1e-15);
      EXPECT_EQ(w(i, 2), 0.0);
    }
  }
}

TEST_F(PolicyTest, RobotHumanAttentionCases) {
  std::mt19937_64 rng(6);
  const Matrix v_hh = random_matrix(4, 8, rng);
  const Matrix robot = random_matrix(1, 9, rng);
  const auto one = net.rh_attention(params, Tensor(v_hh), Tensor(robot), {false, false, false, true});
  for (std::size_t j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(one.output(0, j), one.value(3, j));

  const auto none = net.rh_attention(params, Tensor(v_hh), Tensor(robot), {false, false, false, false});
  for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(none.output(0, j), 0.0);

  Matrix dup(4, 8);
  for (std::size_t i : {0u, 1u}) {
    for (std::size_t j = 0; j < 8; ++j) dup(i, j) = v_hh(0, j);
  }
  const auto single = net.rh_attention(params, Tensor(dup), Tensor(robot), {true, false, false, false});
  const auto both = net.rh_attention(params, Tensor(dup), Tensor(robot), {true, true, false, false});
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(single.output(0, j), both.output(0, j), 1e-15);
}

TEST_F(PolicyTest, RobotHumanAttentionIsPermutationInvariant) {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 50; ++n) {
    const Matrix v_hh = random_matrix(4, 8, rng);
    const Matrix robot = random_matrix(1, 9, rng);
    const std::vector<bool> mask = {true, (n % 2) == 0, true, true};
    const std::size_t perm[] = {2, 0, 3, 1};
    Matrix shuffled(4, 8);
    std::vector<bool> shuffled_mask(4);
    for (std::size_t i = 0; i < 4; ++i) {
      shuffled_mask[i] = mask[perm[i]];
      for (std::size_t j = 0; j < 8; ++j) shuffled(i, j) = v_hh(perm[i], j);
    }
    const auto a = net.rh_attention(params, Tensor(v_hh), Tensor(robot), mask);
    const auto b = net.rh_attention(params, Tensor(shuffled), Tensor(robot), shuffled_mask);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(a.output(0, j), b.output(0, j), 1e-12);
  }
}

TEST(Policy, ConstantValueHead) {
  PolicyNet net(small_config());
  auto& p = net.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) p.mutable_value(i).fill(0.0);
  p.mutable_value(PolicyNet::kValueB)(0, 0) = 2.5;
  std::mt19937_64 rng(8);
  for (int n = 0; n < 10; ++n) {
    const auto obs = random_observation(rng, 4, 2);
    EXPECT_EQ(net.forward(obs, random_matrix(1, 7, rng)).value, 2.5);
  }
}

TEST(Policy, RecurrentStateMatters) {
  PolicyNet net(small_config());
  std::mt19937_64 rng(9);
  const auto obs = random_observation(rng, 4, 2);
  const auto a = net.forward(obs, Matrix(1, 7));
  const auto b = net.forward(obs, random_matrix(1, 7, rng));
  EXPECT_NE(a.value, b.value);
  EXPECT_NE(a.h_next, b.h_next);
}

TEST(Policy, InvisibleHumanPerturbationIsBitExact) {
  PolicyNet net(small_config());
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int n = 0; n < 100; ++n) {
    auto obs = random_observation(rng, 4, 2);
    obs.visible[1] = false;
    const Matrix h = random_matrix(1, 7, rng);
    const auto base = net.forward(obs, h);
    obs.humans[1].position = {u(rng), u(rng)};
    obs.humans[1].predicted = {{u(rng), u(rng)}, {u(rng), u(rng)}};
    EXPECT_TRUE(same_output(base, net.forward(obs, h)));
    // Garbage in a masked feature row is also ignored.
    auto input = make_input(obs, 2);
    for (std::size_t j = 0; j < input.humans.cols(); ++j) input.humans(1, j) = u(rng);
    EXPECT_TRUE(same_output(base, net.forward(input, h)));
  }
}

TEST(Policy, TranslationInvariantOutput) {
  PolicyNet net(small_config());
  std::mt19937_64 rng(11);
  for (int n = 0; n < 50; ++n) {
    const auto obs = random_observation(rng, 4, 2);
    auto moved = obs;
    moved.robot.position += Vec2{3, 3};
    moved.robot.goal += Vec2{3, 3};
    for (auto& hh : moved.humans) {
      hh.position += Vec2{3, 3};
      for (auto& p : hh.predicted) p += Vec2{3, 3};
    }
    const Matrix h = random_matrix(1, 7, rng);
    EXPECT_NEAR(net.forward(obs, h).value, net.forward(moved, h).value, 1e-12);
  }
}

TEST(Gaussian, DensityAtMean) {
  EXPECT_NEAR(gaussian_log_prob({0, 0}, {0, 0}, {0, 0}), -std::log(2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(gaussian_log_prob({0, 0}, {0, 0}, {0, 0}), -1.8379, 1e-4);
}

TEST(Gaussian, TensorFormsAgree) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n = 0; n < 20; ++n) {
    const Vec2 a{u(rng), u(rng)};
    const Vec2 m{u(rng), u(rng)};
    const std::pair<double, double> ls{u(rng), u(rng)};
    const Tensor lp = gaussian_log_prob(Matrix::row({a.x, a.y}), Tensor(Matrix::row({m.x, m.y})),
                                        Tensor(Matrix::row({ls.first, ls.second})));
    EXPECT_NEAR(lp.item(), gaussian_log_prob(a, m, ls), 1e-13);
    EXPECT_NEAR(gaussian_entropy(Tensor(Matrix::row({ls.first, ls.second}))).item(),
                gaussian_entropy(ls), 1e-14);
  }
}

TEST(Gaussian, DegenerateStdReturnsMean) {
  PolicyOutput out;
  out.action_mean = {0.3, -0.2};
  out.action_log_std = {-100, -100};
  std::mt19937_64 rng(13);
  const auto [a, lp] = sample_action(out, rng);
  EXPECT_DOUBLE_EQ(a.x, 0.3);
  EXPECT_DOUBLE_EQ(a.y, -0.2);
}

TEST(Gaussian, SampleMean) {
  PolicyOutput out;
  out.action_mean = {0.3, 0.4};
  std::mt19937_64 rng(14);
  const int n = 100000;
  double sx = 0;
  double sy = 0;
  for (int i = 0; i < n; ++i) {
    const auto [a, lp] = sample_action(out, rng);
    sx += a.x;
    sy += a.y;
  }
  EXPECT_NEAR(sx / n, 0.3, 3.0 / std::sqrt(n));
  EXPECT_NEAR(sy / n, 0.4, 3.0 / std::sqrt(n));
}

TEST(PolicyGradients, HumanHumanAttention) {
  for (int instance = 0; instance < 20; ++instance) {
    EXPECT_LE(testing::hh_attention_gradient_error(instance), testing::kFdTolerance) << instance;
  }
}

TEST(PolicyGradients, RobotHumanAttention) {
  for (int instance = 0; instance < 20; ++instance) {
    EXPECT_LE(testing::rh_attention_gradient_error(instance), testing::kFdTolerance) << instance;
  }
}

}  // namespace
}  // namespace crowdnav::policy
