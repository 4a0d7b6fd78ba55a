#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crowdnav/episode_io.hpp"
#include "crowdnav/ppo.hpp"
#include "crowdnav/sim.hpp"
#include "crowdnav/tensor.hpp"

namespace crowdnav::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;

/// |a - n| / max(|a|, |n|, 1e-3). The floor keeps near-zero gradients from
/// turning rounding noise into a large ratio.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / scale;
}

inline ad::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng);
  return m;
}

/// Values bounded away from zero by `gap`, for checks through kinks at zero.
inline ad::Matrix away_from_zero(ad::Matrix m, double gap = 0.05) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (std::abs(m[i]) < gap) m[i] = m[i] < 0 ? -gap : gap;
  }
  return m;
}

using ScalarFn = std::function<ad::Tensor(const std::vector<ad::Tensor>&)>;

/// Largest relative error between tape gradients and central differences of
/// f over every entry of every input.
inline double gradcheck(const std::vector<ad::Matrix>& inputs, const ScalarFn& f,
                        double h = kFdStep) {
  ad::Tape tape;
  std::vector<ad::Tensor> vars;
  for (const auto& m : inputs) vars.push_back(tape.variable(m));
  const ad::Tensor out = f(vars);
  tape.backward(out);

  double worst = 0.0;
  std::vector<ad::Matrix> work = inputs;
  auto eval = [&] {
    std::vector<ad::Tensor> consts;
    for (const auto& m : work) consts.emplace_back(m);
    return f(consts).item();
  };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ad::Matrix analytic = tape.grad(vars[i]);
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double x = inputs[i][j];
      work[i][j] = x + h;
      const double up = eval();
      work[i][j] = x - h;
      const double down = eval();
      work[i][j] = x;
      worst = std::max(worst, relative_error(analytic[j], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

/// Reduces any tensor to a scalar through fixed random weights so every
/// output entry contributes a distinct gradient.
inline ad::Tensor weighted_sum(const ad::Tensor& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::elementwise_mul(t, ad::Tensor(random_matrix(t.rows(), t.cols(), rng))));
}

/// One finite-difference check per tensor op on random shapes up to 5x5.
/// Returns (op, max relative error) pairs.
inline std::vector<std::pair<std::string, double>> op_gradient_errors(int instance) {
  using namespace ad;
  std::mt19937_64 rng(1000 + instance);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  const std::size_t r = dim(rng);
  const std::size_t c = dim(rng);
  const std::size_t k = dim(rng);
  const Matrix a = random_matrix(r, c, rng);
  const Matrix b = random_matrix(r, c, rng);
  const Matrix row = random_matrix(1, c, rng);
  const Matrix bmat = random_matrix(c, k, rng);
  const std::uint64_t w = 77 + instance;

  std::vector<bool> mask(c);
  for (std::size_t j = 0; j < c; ++j) mask[j] = (j + instance) % 3 != 0;
  std::vector<double> factors(r);
  for (std::size_t i = 0; i < r; ++i) factors[i] = 0.5 + i;
  // Pairs kept apart so minimum() is differentiable at the sample.
  Matrix a_far = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a_far[i] - b[i]) < 0.05) a_far[i] = b[i] + 0.1;
  }
  Matrix clamp_in = a;
  for (std::size_t i = 0; i < clamp_in.size(); ++i) {
    for (double edge : {-0.5, 0.5}) {
      if (std::abs(clamp_in[i] - edge) < 0.05) clamp_in[i] = edge + 0.1;
    }
  }

  std::vector<std::pair<std::string, double>> out;
  auto check = [&](const char* name, std::vector<Matrix> in, const ScalarFn& f) {
    out.emplace_back(name, gradcheck(in, f));
  };
  using V = const std::vector<Tensor>&;
  check("matmul", {a, bmat}, [&](V v) { return weighted_sum(matmul(v[0], v[1]), w); });
  check("add", {a, b}, [&](V v) { return weighted_sum(add(v[0], v[1]), w); });
  check("add_row", {a, row}, [&](V v) { return weighted_sum(add(v[0], v[1]), w); });
  check("sub", {a, b}, [&](V v) { return weighted_sum(sub(v[0], v[1]), w); });
  check("sub_row", {a, row}, [&](V v) { return weighted_sum(sub(v[0], v[1]), w); });
  check("scalar_mul", {a}, [&](V v) { return weighted_sum(scalar_mul(v[0], -1.7), w); });
  check("add_scalar", {a}, [&](V v) { return weighted_sum(add_scalar(v[0], 0.3), w); });
  check("elementwise_mul", {a, b}, [&](V v) { return weighted_sum(elementwise_mul(v[0], v[1]), w); });
  check("scale_rows", {a}, [&](V v) { return weighted_sum(scale_rows(v[0], factors), w); });
  check("concat_cols", {a, b}, [&](V v) {
    const Tensor parts[] = {v[0], v[1], v[0]};
    return weighted_sum(concat_cols(parts), w);
  });
  check("slice_cols", {a}, [&](V v) { return weighted_sum(slice_cols(v[0], c / 2, c - c / 2), w); });
  check("transpose", {a}, [&](V v) { return weighted_sum(transpose(v[0]), w); });
  check("relu", {away_from_zero(a)}, [&](V v) { return weighted_sum(relu(v[0]), w); });
  check("tanh", {a}, [&](V v) { return weighted_sum(tanh(v[0]), w); });
  check("sigmoid", {a}, [&](V v) { return weighted_sum(sigmoid(v[0]), w); });
  check("exp", {a}, [&](V v) { return weighted_sum(exp(v[0]), w); });
  check("square", {a}, [&](V v) { return weighted_sum(square(v[0]), w); });
  check("minimum", {a_far, b}, [&](V v) { return weighted_sum(minimum(v[0], v[1]), w); });
  check("clamp", {clamp_in}, [&](V v) { return weighted_sum(clamp(v[0], -0.5, 0.5), w); });
  check("row_softmax", {a}, [&](V v) { return weighted_sum(row_softmax(v[0]), w); });
  check("masked_row_softmax", {a}, [&](V v) { return weighted_sum(masked_row_softmax(v[0], mask), w); });
  check("sum", {a}, [&](V v) { return square(sum(v[0])); });
  check("mean", {a}, [&](V v) { return square(mean(v[0])); });
  check("composite", {a, bmat, row}, [&](V v) {
    const Tensor h = tanh(add(matmul(transpose(v[0]), scale_rows(v[0], factors)), v[2]));
    return mean(square(matmul(h, add_scalar(matmul(transpose(v[0]), v[0]), 0.1))));
  });
  return out;
}

/// GRU cell gradient check on random sizes up to 4.
inline double gru_gradient_error(int instance) {
  std::mt19937_64 rng(500 + instance);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  const std::size_t in = dim(rng);
  const std::size_t hd = dim(rng);
  std::vector<ad::Matrix> inputs = {random_matrix(1, in, rng), random_matrix(1, hd, rng)};
  for (int g = 0; g < 3; ++g) {
    inputs.push_back(random_matrix(in, hd, rng));
    inputs.push_back(random_matrix(hd, hd, rng));
    inputs.push_back(random_matrix(1, hd, rng));
  }
  return gradcheck(inputs, [&](const std::vector<ad::Tensor>& v) {
    const ad::GruParams p{v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
    return weighted_sum(ad::gru_cell(v[0], v[1], p), 9 + instance);
  });
}

/// True when some pair of humans strictly overlaps.
inline bool any_human_overlap(const std::vector<AgentState>& humans) {
  for (std::size_t i = 0; i < humans.size(); ++i) {
    for (std::size_t j = i + 1; j < humans.size(); ++j) {
      if (discs_overlap(humans[i].position, humans[i].radius, humans[j].position, humans[j].radius)) {
        return true;
      }
    }
  }
  return false;
}

/// Advantages as the lambda-weighted mix of n-step returns:
///   A_t = (1-l) sum_{n<M} l^{n-1} G_n + l^{M-1} G_M - V_t
/// where M counts the steps to the end of the episode or sequence, and only
/// a sequence cut off without a terminal bootstraps from `bootstrap`.
inline std::vector<double> brute_force_gae(const std::vector<double>& rewards,
                                           const std::vector<double>& values,
                                           const std::vector<bool>& dones, double bootstrap,
                                           double gamma, double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t end = t;
    while (end + 1 < n && !dones[end]) ++end;
    const bool terminal = dones[end];
    const std::size_t m = end - t + 1;
    auto n_step = [&](std::size_t steps) {
      double g = 0.0;
      for (std::size_t l = 0; l < steps; ++l) g += std::pow(gamma, double(l)) * rewards[t + l];
      if (steps < m) {
        g += std::pow(gamma, double(steps)) * values[t + steps];
      } else if (!terminal) {
        g += std::pow(gamma, double(steps)) * bootstrap;
      }
      return g;
    };
    double a = 0.0;
    for (std::size_t s = 1; s < m; ++s) a += (1 - lambda) * std::pow(lambda, double(s - 1)) * n_step(s);
    a += std::pow(lambda, double(m - 1)) * n_step(m);
    out[t] = a - values[t];
  }
  return out;
}

/// Small network and crowd for gradient checks through the whole loss.
inline policy::PolicyConfig tiny_policy(std::uint64_t seed) {
  policy::PolicyConfig c;
  c.horizon = 2;
  c.max_humans = 3;
  c.d_hh = 4;
  c.hh_heads = 2;
  c.d_rh = 4;
  c.d_r = 3;
  c.d_h = 4;
  c.init_log_std = -0.3;
  c.init_seed = seed;
  return c;
}

inline SimConfig tiny_sim() {
  SimConfig c;
  c.max_humans = 3;
  c.prediction_steps = 2;
  return c;
}

inline std::vector<ad::Matrix> parameter_values(const policy::PolicyNet& net) {
  std::vector<ad::Matrix> out;
  for (std::size_t i = 0; i < net.parameters().size(); ++i) out.push_back(net.parameters().value(i));
  return out;
}

/// Human-human attention w.r.t. its features and every network weight.
inline double hh_attention_gradient_error(int instance) {
  const policy::PolicyNet net(tiny_policy(100 + instance));
  std::mt19937_64 rng(200 + instance);
  auto inputs = parameter_values(net);
  const std::size_t slot = inputs.size();
  inputs.push_back(random_matrix(3, net.config().feature_width(), rng, -2, 2));
  const std::vector<bool> mask = {true, instance % 3 != 0, true};
  return gradcheck(inputs, [&](const std::vector<ad::Tensor>& v) {
    const std::vector<ad::Tensor> p(v.begin(), v.begin() + static_cast<long>(slot));
    return weighted_sum(net.hh_attention(p, v[slot], mask).output, 7);
  });
}

/// Robot-human attention w.r.t. v_HH, the robot features and every weight.
inline double rh_attention_gradient_error(int instance) {
  const policy::PolicyNet net(tiny_policy(300 + instance));
  std::mt19937_64 rng(400 + instance);
  auto inputs = parameter_values(net);
  const std::size_t slot = inputs.size();
  inputs.push_back(random_matrix(3, static_cast<std::size_t>(net.config().d_hh), rng, -2, 2));
  inputs.push_back(random_matrix(1, policy::kRobotFeatures, rng, -2, 2));
  const std::vector<bool> mask = {instance % 2 == 0, true, true};
  return gradcheck(inputs, [&](const std::vector<ad::Tensor>& v) {
    const std::vector<ad::Tensor> p(v.begin(), v.begin() + static_cast<long>(slot));
    return weighted_sum(net.rh_attention(p, v[slot], v[slot + 1], mask).output, 5);
  });
}

/// Central differences of the PPO loss w.r.t. every parameter entry against
/// the tape gradient, on a short rollout with perturbed old log-probs so the
/// ratio is away from 1 but off the clip edges. Returns the largest relative error.
inline double ppo_loss_gradcheck(std::uint64_t seed, int samples = 12) {
  policy::PolicyNet net(tiny_policy(seed));
  auto envs = ppo::make_envs(tiny_sim(), 2, seed, net);
  const auto batch = ppo::collect_rollouts(net, envs, samples / 2, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ppo::Transition> transitions = batch.transitions;
  std::vector<double> adv;
  std::vector<double> ret;
  ppo::TrainConfig cfg;
  for (auto& tr : transitions) {
    tr.log_prob += 0.4 * u(rng);
    adv.push_back(u(rng));
    ret.push_back(2.0 * u(rng));
    // Keep the ratio off the clip edges, where the loss has a kink.
    const auto out = net.forward(tr.input, tr.h_prev);
    const double lp = policy::gaussian_log_prob(tr.action, out.action_mean, out.action_log_std);
    for (double edge : {1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon}) {
      if (std::abs(std::exp(lp - tr.log_prob) - edge) < 1e-3) tr.log_prob += 0.01;
    }
  }
  std::vector<const ppo::Transition*> ptrs;
  for (const auto& tr : transitions) ptrs.push_back(&tr);

  std::vector<ad::Matrix> grads;
  ppo::ppo_loss(net, ptrs, adv, ret, cfg, &grads);
  double worst = 0.0;
  auto& params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params.value(i).size(); ++j) {
      double& x = params.mutable_value(i)[j];
      const double saved = x;
      x = saved + kFdStep;
      const double up = ppo::ppo_loss(net, ptrs, adv, ret, cfg, nullptr).total;
      x = saved - kFdStep;
      const double down = ppo::ppo_loss(net, ptrs, adv, ret, cfg, nullptr).total;
      x = saved;
      worst = std::max(worst, relative_error(grads[i][j], (up - down) / (2.0 * kFdStep)));
    }
  }
  return worst;
}

/// Hand-built 3-step success: the robot walks (0,0) -> (0.25,0) -> (0.5,0)
/// -> (0.65,0.2). Only at step 1 does a true future disc of the nearest human
/// (then 1 m away) overlap the robot.
inline EpisodeRecord scripted_episode() {
  EpisodeRecord ep;
  ep.dt = 0.25;
  const Vec2 robot_path[] = {{0, 0}, {0.25, 0}, {0.5, 0}, {0.65, 0.2}};
  for (int t = 0; t < 4; ++t) {
    StepFrame f;
    f.t = t;
    f.robot.position = robot_path[t];
    f.robot.goal = {0.65, 0.2};
    f.robot.radius = 0.3;
    if (t > 0) f.action = (robot_path[t] - robot_path[t - 1]) * 4.0;
    HumanFrame near;
    near.id = 0;
    HumanFrame far;
    far.id = 1;
    far.position = {4, 4};
    if (t == 1) {
      near.position = {1.25, 0};
      f.gt_futures = {{{1.0, 0}, {0.75, 0}, {0.5, 0}}, {{4, 4}, {4, 4}, {4, 4}}};
    } else {
      near.position = {-4, -4};
      f.gt_futures = {{{-4, -4}}, {{4, 4}}};
    }
    f.humans = {near, far};
    if (t == 3) {
      f.done = true;
      f.outcome = OutcomeKind::ReachedGoal;
    }
    ep.frames.push_back(f);
  }
  return ep;
}

}  // namespace crowdnav::testing
