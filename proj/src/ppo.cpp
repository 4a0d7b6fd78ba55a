#include "crowdnav/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "crowdnav/parallel.hpp"

namespace crowdnav::ppo {
namespace {

using ad::Matrix;
using ad::Tensor;

constexpr std::size_t kChunk = 8;  // samples per gradient tape

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void dump_batch(const std::filesystem::path& path, const RolloutBatch& batch) {
  if (path.empty()) return;
  std::ofstream out(path);
  out.precision(17);
  out << "env,t,action_x,action_y,log_prob,value,reward,done\n";
  for (int e = 0; e < batch.num_envs; ++e) {
    for (int t = 0; t < batch.num_steps; ++t) {
      const auto& tr = batch.at(e, t);
      out << e << ',' << t << ',' << tr.action.x << ',' << tr.action.y << ',' << tr.log_prob
          << ',' << tr.value << ',' << tr.reward << ',' << tr.done << '\n';
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (num_envs <= 0 || steps_per_update <= 0) {
    throw std::invalid_argument("num_envs and steps_per_update must be positive");
  }
  if (total_steps < 0) throw std::invalid_argument("total_steps must be non-negative");
  if (!(gamma > 0.0 && gamma <= 1.0) || !(lambda > 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("gamma and lambda must lie in (0, 1]");
  }
  if (!(clip_epsilon > 0.0)) throw std::invalid_argument("clip_epsilon must be positive");
  if (lr < 0.0) throw std::invalid_argument("lr must be non-negative");
  if (!(reward_scale > 0.0)) throw std::invalid_argument("reward_scale must be positive");
  if (epochs <= 0 || minibatches <= 0) {
    throw std::invalid_argument("epochs and minibatches must be positive");
  }
  if (minibatches > num_envs * steps_per_update) {
    throw std::invalid_argument("more minibatches than transitions per update");
  }
}

// ---------------------------------------------------------------------------
// Rollouts

RolloutEnv::RolloutEnv(const SimConfig& config, std::uint64_t stream_seed,
                       const policy::PolicyNet& net)
    : env_(config), stream_seed_(stream_seed), action_rng_(splitmix64(stream_seed ^ 0xa5a5ULL)) {
  start_episode(net);
}

void RolloutEnv::start_episode(const policy::PolicyNet& net) {
  const std::uint64_t seed = splitmix64(stream_seed_ + splitmix64(episode_));
  ++episode_;
  obs_ = env_.reset(seed);
  hidden_ = net.initial_state();
}

double RolloutEnv::run(const policy::PolicyNet& net, int steps, std::vector<Transition>& out,
                       std::vector<OutcomeKind>& finished) {
  const int horizon = net.config().horizon;
  for (int t = 0; t < steps; ++t) {
    Transition tr;
    tr.input = policy::make_input(obs_, horizon);
    tr.h_prev = hidden_;
    const auto output = net.forward(tr.input, hidden_);
    const auto [action, log_prob] = policy::sample_action(output, action_rng_);
    tr.action = action;
    tr.log_prob = log_prob;
    tr.value = output.value;

    StepResult result = env_.step(action);
    tr.reward = result.reward;
    tr.done = result.done;
    out.push_back(std::move(tr));

    if (result.done) {
      finished.push_back(result.outcome ? result.outcome->kind : OutcomeKind::Timeout);
      start_episode(net);
    } else {
      obs_ = std::move(result.observation);
      hidden_ = output.h_next;
    }
  }
  return net.forward(policy::make_input(obs_, horizon), hidden_).value;
}

std::vector<RolloutEnv> make_envs(const SimConfig& config, int num_envs, std::uint64_t seed,
                                  const policy::PolicyNet& net) {
  std::vector<RolloutEnv> envs;
  envs.reserve(static_cast<std::size_t>(num_envs));
  for (int e = 0; e < num_envs; ++e) {
    envs.emplace_back(config, splitmix64(seed * 1000003ULL + static_cast<std::uint64_t>(e)), net);
  }
  return envs;
}

RolloutBatch collect_rollouts(const policy::PolicyNet& net, std::vector<RolloutEnv>& envs,
                              int steps, int threads) {
  const auto n = envs.size();
  std::vector<std::vector<Transition>> per_env(n);
  std::vector<std::vector<OutcomeKind>> per_env_done(n);
  std::vector<double> bootstrap(n);
  parallel_for(n, threads, [&](std::size_t e) {
    per_env[e].reserve(static_cast<std::size_t>(steps));
    bootstrap[e] = envs[e].run(net, steps, per_env[e], per_env_done[e]);
  });

  RolloutBatch batch;
  batch.num_envs = static_cast<int>(n);
  batch.num_steps = steps;
  batch.bootstrap_values = std::move(bootstrap);
  batch.transitions.reserve(n * static_cast<std::size_t>(steps));
  for (std::size_t e = 0; e < n; ++e) {
    for (auto& tr : per_env[e]) batch.transitions.push_back(std::move(tr));
    batch.finished.insert(batch.finished.end(), per_env_done[e].begin(), per_env_done[e].end());
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Advantages

Advantages gae(std::span<const double> rewards, std::span<const double> values,
               std::span<const bool> dones, double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw std::invalid_argument("gae: rewards, values and dones must have equal length");
  }
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * live - values[i];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
    next_value = values[i];
  }
  return out;
}

Advantages batch_advantages(const RolloutBatch& batch, double gamma, double lambda,
                             double reward_scale) {
  Advantages all;
  const auto steps = static_cast<std::size_t>(batch.num_steps);
  std::vector<double> rewards(steps);
  std::vector<double> values(steps);
  std::vector<char> dones_raw(steps);
  for (int e = 0; e < batch.num_envs; ++e) {
    std::unique_ptr<bool[]> dones(new bool[steps]);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto& tr = batch.at(e, static_cast<int>(t));
      rewards[t] = tr.reward * reward_scale;
      values[t] = tr.value;
      dones[t] = tr.done;
    }
    const auto adv = gae(rewards, values, std::span<const bool>(dones.get(), steps),
                         batch.bootstrap_values[static_cast<std::size_t>(e)], gamma, lambda);
    all.advantages.insert(all.advantages.end(), adv.advantages.begin(), adv.advantages.end());
    all.returns.insert(all.returns.end(), adv.returns.begin(), adv.returns.end());
  }
  return all;
}

std::vector<double> normalize(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  if (out.empty()) return out;
  const double m = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  double var = 0.0;
  for (double x : out) var += (x - m) * (x - m);
  const double sd = std::sqrt(var / static_cast<double>(out.size()));
  for (double& x : out) x = (x - m) / (sd + 1e-8);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

Adam::Adam(const ad::ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params.value(i);
    m_.emplace_back(v.rows(), v.cols());
    v_.emplace_back(v.rows(), v.cols());
  }
}

void Adam::step(ad::ParameterSet& params, const std::vector<Matrix>& grads) {
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params.mutable_value(i);
    const Matrix& g = grads[i];
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

double clip_grad_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (auto& g : grads) {
      for (double& v : g.data()) v *= scale;
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Loss

LossTerms ppo_loss(const policy::PolicyNet& net, std::span<const Transition* const> samples,
                   std::span<const double> advantages, std::span<const double> returns,
                   const TrainConfig& config, std::vector<Matrix>* grads, int threads) {
  const std::size_t n = samples.size();
  if (advantages.size() != n || returns.size() != n) {
    throw std::invalid_argument("ppo_loss: advantages and returns must match the samples");
  }
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lo = 1.0 - config.clip_epsilon;
  const double hi = 1.0 + config.clip_epsilon;

  struct ChunkResult {
    LossTerms terms;
    std::vector<Matrix> grads;
  };
  std::vector<ChunkResult> results(chunks);

  parallel_for(chunks, threads, [&](std::size_t c) {
    ad::Tape tape;
    const auto params = net.parameters().bind(grads ? &tape : nullptr);
    LossTerms& terms = results[c].terms;
    Tensor total;
    bool have_total = false;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const Transition& tr = *samples[i];
      const auto g = net.forward_graph(params, tr.input, Tensor(tr.h_prev));
      const Matrix action = Matrix::row({tr.action.x, tr.action.y});
      const Tensor log_prob = policy::gaussian_log_prob(action, g.mean, g.log_std);
      const Tensor ratio = exp(add_scalar(log_prob, -tr.log_prob));
      const double adv = advantages[i];
      const Tensor surrogate =
          minimum(scalar_mul(ratio, adv), scalar_mul(clamp(ratio, lo, hi), adv));
      const Tensor value_err = square(add_scalar(g.value, -returns[i]));
      const Tensor entropy = policy::gaussian_entropy(g.log_std);

      const double r = ratio.item();
      if (r < lo || r > hi) terms.clip_fraction += inv_n;
      terms.policy += -surrogate.item() * inv_n;
      terms.value += value_err.item() * inv_n;
      terms.entropy += entropy.item() * inv_n;

      const Tensor sample_loss =
          scalar_mul(add(sub(scalar_mul(surrogate, -1.0), scalar_mul(entropy, config.entropy_coef)),
                         scalar_mul(value_err, config.value_coef)),
                     inv_n);
      total = have_total ? add(total, sample_loss) : sample_loss;
      have_total = true;
    }
    terms.total = total.item();
    if (grads) {
      tape.backward(total);
      results[c].grads.reserve(params.size());
      for (const auto& p : params) results[c].grads.push_back(tape.grad(p));
    }
  });

  LossTerms terms;
  if (grads) {
    grads->clear();
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
      const auto& v = net.parameters().value(i);
      grads->emplace_back(v.rows(), v.cols());
    }
  }
  for (auto& r : results) {
    terms.policy += r.terms.policy;
    terms.value += r.terms.value;
    terms.entropy += r.terms.entropy;
    terms.total += r.terms.total;
    terms.clip_fraction += r.terms.clip_fraction;
    if (grads) {
      for (std::size_t i = 0; i < r.grads.size(); ++i) (*grads)[i].add_scaled(r.grads[i]);
    }
  }
  return terms;
}

UpdateStats ppo_update(policy::PolicyNet& net, Adam& optimizer, const RolloutBatch& batch,
                       const TrainConfig& config, std::mt19937_64& rng, int threads,
                       const std::filesystem::path& dump_path) {
  const Advantages adv = batch_advantages(batch, config.gamma, config.lambda, config.reward_scale);
  const std::vector<double> norm_adv = normalize(adv.advantages);
  const std::size_t n = batch.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto mb_count = static_cast<std::size_t>(config.minibatches);

  UpdateStats stats;
  std::vector<Matrix> grads;
  std::vector<const Transition*> samples;
  std::vector<double> mb_adv;
  std::vector<double> mb_ret;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t mb = 0; mb < mb_count; ++mb) {
      const std::size_t begin = mb * n / mb_count;
      const std::size_t end = (mb + 1) * n / mb_count;
      samples.clear();
      mb_adv.clear();
      mb_ret.clear();
      for (std::size_t i = begin; i < end; ++i) {
        samples.push_back(&batch.transitions[order[i]]);
        mb_adv.push_back(norm_adv[order[i]]);
        mb_ret.push_back(adv.returns[order[i]]);
      }
      const LossTerms terms = ppo_loss(net, samples, mb_adv, mb_ret, config, &grads, threads);
      bool finite = std::isfinite(terms.total);
      for (const auto& g : grads) {
        for (double v : g.data()) finite = finite && std::isfinite(v);
      }
      if (!finite) {
        dump_batch(dump_path, batch);
        throw std::runtime_error("non-finite PPO loss" +
                                 (dump_path.empty() ? std::string()
                                                    : "; batch dumped to " + dump_path.string()));
      }
      clip_grad_norm(grads, config.max_grad_norm);
      optimizer.step(net.parameters(), grads);

      stats.policy_loss += terms.policy;
      stats.value_loss += terms.value;
      stats.entropy += terms.entropy;
      stats.clip_fraction += terms.clip_fraction;
      ++stats.minibatch_steps;
    }
  }
  if (stats.minibatch_steps > 0) {
    const double k = 1.0 / stats.minibatch_steps;
    stats.policy_loss *= k;
    stats.value_loss *= k;
    stats.entropy *= k;
    stats.clip_fraction *= k;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(policy::PolicyNet& net, const SimConfig& sim, const TrainConfig& config,
                  const std::filesystem::path& out_dir, int threads,
                  const std::function<void(const TrainLogRow&)>& on_update) {
  config.validate();
  if (net.config().horizon != sim.horizon()) {
    throw std::invalid_argument("policy horizon does not match the simulator's prediction horizon");
  }
  if (net.config().max_humans != sim.max_humans) {
    throw std::invalid_argument("policy human slots do not match the simulator's max_humans");
  }

  const bool write = !out_dir.empty();
  std::ofstream log_file;
  if (write) {
    std::filesystem::create_directories(out_dir / "checkpoints");
    log_file.open(out_dir / "train_log.csv");
    log_file << "update_idx,steps,mean_reward,sr_recent,policy_loss,value_loss,entropy\n";
    log_file.precision(10);
    net.parameters().save(out_dir / "checkpoints" / "update_000000.params");
  }

  Adam optimizer(net.parameters(), config.lr, config.adam_beta1, config.adam_beta2,
                 config.adam_eps);
  std::mt19937_64 rng(splitmix64(config.seed ^ 0x7070ULL));
  auto envs = make_envs(sim, config.num_envs, config.seed, net);
  std::deque<OutcomeKind> recent;

  TrainResult result;
  const long long updates = config.num_updates();
  long long steps = 0;
  for (long long u = 1; u <= updates; ++u) {
    const RolloutBatch batch = collect_rollouts(net, envs, config.steps_per_update, threads);
    steps += static_cast<long long>(batch.size());
    for (auto k : batch.finished) {
      recent.push_back(k);
      if (static_cast<int>(recent.size()) > config.sr_window) recent.pop_front();
    }
    const std::filesystem::path dump = write ? out_dir / "nan_batch.csv" : std::filesystem::path{};
    const UpdateStats stats = ppo_update(net, optimizer, batch, config, rng, threads, dump);

    TrainLogRow row;
    row.update = static_cast<int>(u);
    row.steps = steps;
    double reward_sum = 0.0;
    for (const auto& tr : batch.transitions) reward_sum += tr.reward;
    row.mean_reward = reward_sum / static_cast<double>(batch.size());
    row.sr_recent = recent.empty() ? 0.0
                                   : static_cast<double>(std::count(recent.begin(), recent.end(),
                                                                    OutcomeKind::ReachedGoal)) /
                                         static_cast<double>(recent.size());
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.entropy = stats.entropy;
    result.log.push_back(row);
    ++result.updates;

    if (write) {
      log_file << row.update << ',' << row.steps << ',' << row.mean_reward << ',' << row.sr_recent
               << ',' << row.policy_loss << ',' << row.value_loss << ',' << row.entropy << '\n';
      log_file.flush();
      if (config.checkpoint_every > 0 && u % config.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "update_%06lld.params", u);
        net.parameters().save(out_dir / "checkpoints" / name);
      }
    }
    if (on_update) on_update(row);
  }
  if (write && result.updates > 0) net.parameters().save(out_dir / "policy.params");
  return result;
}

}  // namespace crowdnav::ppo
