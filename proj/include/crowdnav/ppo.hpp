#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "crowdnav/policy.hpp"
#include "crowdnav/sim.hpp"
#include "crowdnav/tensor.hpp"

namespace crowdnav::ppo {

struct TrainConfig {
  int num_envs = 16;
  int steps_per_update = 30;
  long long total_steps = 200000;
  double lr = 4e-5;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int epochs = 4;
  int minibatches = 4;
  double max_grad_norm = 0.5;
  double reward_scale = 1.0;  // applied to rewards inside GAE only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-5;
  std::uint64_t seed = 0;
  int checkpoint_every = 100;  // updates; 0 disables periodic checkpoints
  int sr_window = 100;         // completed episodes in the recent success rate

  long long steps_per_collect() const {
    return static_cast<long long>(num_envs) * steps_per_update;
  }
  long long num_updates() const { return total_steps / steps_per_collect(); }
  void validate() const;
};

struct Transition {
  policy::PolicyInput input;
  ad::Matrix h_prev;  // recurrent state before this step
  Vec2 action;        // raw sample, before the environment clamps it
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

/// num_envs x num_steps transitions stored env-major.
struct RolloutBatch {
  int num_envs = 0;
  int num_steps = 0;
  std::vector<Transition> transitions;
  std::vector<double> bootstrap_values;  // V(s_T) per env
  std::vector<OutcomeKind> finished;     // episodes completed during the rollout

  const Transition& at(int env, int t) const {
    return transitions[static_cast<std::size_t>(env * num_steps + t)];
  }
  std::size_t size() const { return transitions.size(); }
};

/// One training environment with its recurrent state and random streams.
class RolloutEnv {
 public:
  RolloutEnv(const SimConfig& config, std::uint64_t stream_seed, const policy::PolicyNet& net);

  Environment& env() { return env_; }
  const Observation& observation() const { return obs_; }
  const ad::Matrix& hidden() const { return hidden_; }
  std::uint64_t episodes_started() const { return episode_; }

  /// Advances `steps` steps with `net`, appending to `out`; returns V of the final state.
  double run(const policy::PolicyNet& net, int steps, std::vector<Transition>& out,
             std::vector<OutcomeKind>& finished);

 private:
  void start_episode(const policy::PolicyNet& net);

  Environment env_;
  std::uint64_t stream_seed_;
  std::uint64_t episode_ = 0;
  std::mt19937_64 action_rng_;
  Observation obs_;
  ad::Matrix hidden_;
};

std::vector<RolloutEnv> make_envs(const SimConfig& config, int num_envs, std::uint64_t seed,
                                  const policy::PolicyNet& net);

RolloutBatch collect_rollouts(const policy::PolicyNet& net, std::vector<RolloutEnv>& envs,
                              int steps, int threads);

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation over one sequence. done[t] marks the
/// last transition of an episode, which never bootstraps.
Advantages gae(std::span<const double> rewards, std::span<const double> values,
               std::span<const bool> dones, double bootstrap_value, double gamma, double lambda);

/// GAE for every env of a batch, flattened in batch order.
Advantages batch_advantages(const RolloutBatch& batch, double gamma, double lambda,
                             double reward_scale = 1.0);

/// Mean 0 / std 1 rescaling; a constant input maps to zeros.
std::vector<double> normalize(std::span<const double> xs);

class Adam {
 public:
  Adam(const ad::ParameterSet& params, double lr, double beta1, double beta2, double eps);
  void step(ad::ParameterSet& params, const std::vector<ad::Matrix>& grads);
  double lr() const { return lr_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long step_ = 0;
  std::vector<ad::Matrix> m_;
  std::vector<ad::Matrix> v_;
};

struct LossTerms {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped-surrogate loss averaged over `samples`, with parameter gradients
/// written to `grads` when given. advantages/returns are indexed like samples.
LossTerms ppo_loss(const policy::PolicyNet& net, std::span<const Transition* const> samples,
                   std::span<const double> advantages, std::span<const double> returns,
                   const TrainConfig& config, std::vector<ad::Matrix>* grads, int threads = 1);

/// Global L2 norm clip; returns the pre-clip norm.
double clip_grad_norm(std::vector<ad::Matrix>& grads, double max_norm);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  int minibatch_steps = 0;
};

/// Epochs x minibatches of Adam steps on `batch`. A non-finite loss writes
/// the batch to `dump_path` (when non-empty) and throws std::runtime_error.
UpdateStats ppo_update(policy::PolicyNet& net, Adam& optimizer, const RolloutBatch& batch,
                       const TrainConfig& config, std::mt19937_64& rng, int threads,
                       const std::filesystem::path& dump_path = {});

struct TrainLogRow {
  int update = 0;
  long long steps = 0;
  double mean_reward = 0.0;
  double sr_recent = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  int updates = 0;
};

/// collect -> gae -> update until total_steps. With a non-empty out_dir,
/// writes train_log.csv, periodic checkpoints and policy.params.
TrainResult train(policy::PolicyNet& net, const SimConfig& sim, const TrainConfig& config,
                  const std::filesystem::path& out_dir, int threads,
                  const std::function<void(const TrainLogRow&)>& on_update = {});

}  // namespace crowdnav::ppo
