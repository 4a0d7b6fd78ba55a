#include "crowdnav/policy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace crowdnav::policy {
namespace {

using ad::Matrix;
using ad::Tensor;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Matrix xavier(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double gain = 1.0) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

std::vector<double> mask_factors(const std::vector<bool>& mask) {
  std::vector<double> f(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) f[i] = mask[i] ? 1.0 : 0.0;
  return f;
}

}  // namespace

void PolicyConfig::validate() const {
  if (horizon < 0 || max_humans < 0) throw std::invalid_argument("policy sizes must be >= 0");
  if (d_hh <= 0 || d_rh <= 0 || d_r <= 0 || d_h <= 0 || hh_heads <= 0) {
    throw std::invalid_argument("policy layer sizes must be positive");
  }
  if (d_hh % hh_heads != 0) throw std::invalid_argument("d_hh must be divisible by hh_heads");
}

std::pair<Matrix, std::vector<bool>> build_human_features(const Observation& obs, int horizon) {
  const std::size_t slots = obs.humans.size();
  const std::size_t width = 2 * static_cast<std::size_t>(horizon + 1);
  Matrix features(slots, width);
  std::vector<bool> mask(slots, false);
  const Vec2 origin = obs.robot.position;
  for (std::size_t i = 0; i < slots; ++i) {
    if (i >= obs.visible.size() || !obs.visible[i]) continue;
    mask[i] = true;
    const auto& h = obs.humans[i];
    const Vec2 rel = h.position - origin;
    features(i, 0) = rel.x;
    features(i, 1) = rel.y;
    for (int k = 0; k < horizon; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const Vec2 p = (kk < h.predicted.size() ? h.predicted[kk] : h.position) - origin;
      features(i, 2 + 2 * kk) = p.x;
      features(i, 3 + 2 * kk) = p.y;
    }
  }
  return {std::move(features), std::move(mask)};
}

Matrix build_robot_features(const AgentState& robot) {
  const Vec2 goal = robot.goal - robot.position;
  return Matrix(1, kRobotFeatures,
                {0.0, 0.0, robot.velocity.x, robot.velocity.y, goal.x, goal.y, robot.v_max,
                 robot.heading, robot.radius});
}

PolicyInput make_input(const Observation& obs, int horizon) {
  auto [features, mask] = build_human_features(obs, horizon);
  return {std::move(features), std::move(mask), build_robot_features(obs.robot)};
}

double gaussian_log_prob(const Vec2& action, const Vec2& mean, std::pair<double, double> log_std) {
  const double zx = (action.x - mean.x) / std::exp(log_std.first);
  const double zy = (action.y - mean.y) / std::exp(log_std.second);
  return -0.5 * (zx * zx + zy * zy) - (log_std.first + log_std.second) - kLog2Pi;
}

double gaussian_entropy(std::pair<double, double> log_std) {
  return log_std.first + log_std.second + 1.0 + kLog2Pi;
}

Tensor gaussian_log_prob(const Matrix& action, const Tensor& mean, const Tensor& log_std) {
  const Tensor z = elementwise_mul(sub(Tensor(action), mean), exp(scalar_mul(log_std, -1.0)));
  return add_scalar(sub(scalar_mul(sum(square(z)), -0.5), sum(log_std)), -kLog2Pi);
}

Tensor gaussian_entropy(const Tensor& log_std) { return add_scalar(sum(log_std), 1.0 + kLog2Pi); }

std::pair<Vec2, double> sample_action(const PolicyOutput& out, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double nx = normal(rng);
  const double ny = normal(rng);
  const Vec2 action{out.action_mean.x + std::exp(out.action_log_std.first) * nx,
                    out.action_mean.y + std::exp(out.action_log_std.second) * ny};
  return {action, gaussian_log_prob(action, out.action_mean, out.action_log_std)};
}

// ---------------------------------------------------------------------------

PolicyNet::PolicyNet(PolicyConfig config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.init_seed);
  const auto f = config_.feature_width();
  const auto d_hh = static_cast<std::size_t>(config_.d_hh);
  const auto d_rh = static_cast<std::size_t>(config_.d_rh);
  const auto d_r = static_cast<std::size_t>(config_.d_r);
  const auto d_h = static_cast<std::size_t>(config_.d_h);
  const std::size_t d_in = d_rh + d_r;

  params_.add("hh_query", xavier(f, d_hh, rng));
  params_.add("hh_key", xavier(f, d_hh, rng));
  params_.add("hh_value", xavier(f, d_hh, rng));
  params_.add("hh_out", xavier(d_hh, d_hh, rng));
  params_.add("hh_out_bias", Matrix(1, d_hh));
  params_.add("rh_query", xavier(d_hh, d_rh, rng));
  params_.add("rh_key", xavier(kRobotFeatures, d_rh, rng));
  params_.add("rh_value", xavier(d_hh, d_rh, rng));
  params_.add("robot_w", xavier(kRobotFeatures, d_r, rng));
  params_.add("robot_b", Matrix(1, d_r));
  params_.add("gru_wz", xavier(d_in, d_h, rng));
  params_.add("gru_uz", xavier(d_h, d_h, rng));
  params_.add("gru_bz", Matrix(1, d_h));
  params_.add("gru_wr", xavier(d_in, d_h, rng));
  params_.add("gru_ur", xavier(d_h, d_h, rng));
  params_.add("gru_br", Matrix(1, d_h));
  params_.add("gru_wh", xavier(d_in, d_h, rng));
  params_.add("gru_uh", xavier(d_h, d_h, rng));
  params_.add("gru_bh", Matrix(1, d_h));
  params_.add("value_w", xavier(d_h, 1, rng));
  params_.add("value_b", Matrix(1, 1));
  params_.add("mean_w", xavier(d_h, 2, rng, 0.01));
  params_.add("mean_b", Matrix(1, 2));
  params_.add("log_std", Matrix(1, 2, config_.init_log_std));
}

Matrix PolicyNet::initial_state() const { return Matrix(1, static_cast<std::size_t>(config_.d_h)); }

HhAttention PolicyNet::hh_attention(const std::vector<Tensor>& p, const Tensor& features,
                                    const std::vector<bool>& mask) const {
  const Tensor q = matmul(features, p[kHhQuery]);
  const Tensor k = matmul(features, p[kHhKey]);
  const Tensor v = matmul(features, p[kHhValue]);

  const auto heads = static_cast<std::size_t>(config_.hh_heads);
  const std::size_t head_dim = static_cast<std::size_t>(config_.d_hh) / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const auto row_mask = mask_factors(mask);

  HhAttention out;
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * head_dim, head_dim);
    const Tensor kh = slice_cols(k, h * head_dim, head_dim);
    const Tensor vh = slice_cols(v, h * head_dim, head_dim);
    const Tensor scores = scalar_mul(matmul(qh, transpose(kh)), scale);
    // Masked keys get no weight; masked queries are zeroed.
    const Tensor w = scale_rows(masked_row_softmax(scores, mask), row_mask);
    out.weights.push_back(w);
    head_outputs.push_back(matmul(w, vh));
  }
  out.mixed = concat_cols(head_outputs);
  out.output =
      scale_rows(relu(add(matmul(out.mixed, p[kHhOut]), p[kHhOutBias])), row_mask);
  return out;
}

RhAttention PolicyNet::rh_attention(const std::vector<Tensor>& p, const Tensor& v_hh,
                                    const Tensor& robot, const std::vector<bool>& mask) const {
  const Tensor q = matmul(v_hh, p[kRhQuery]);   // slots x d_rh
  const Tensor k = matmul(robot, p[kRhKey]);    // 1 x d_rh
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.d_rh));
  // One score per human against the single robot key, normalized over humans.
  const Tensor scores = scalar_mul(transpose(matmul(q, transpose(k))), scale);  // 1 x slots
  RhAttention out;
  out.weights = masked_row_softmax(scores, mask);
  out.value = matmul(v_hh, p[kRhValue]);
  out.output = matmul(out.weights, out.value);
  return out;
}

PolicyGraph PolicyNet::forward_graph(const std::vector<Tensor>& p, const PolicyInput& input,
                                     const Tensor& h_prev) const {
  if (input.humans.cols() != config_.feature_width()) {
    throw std::invalid_argument("human feature width does not match the policy horizon");
  }
  if (input.mask.size() != input.humans.rows()) {
    throw std::invalid_argument("mask length must equal the number of human slots");
  }
  const Tensor features(input.humans);
  const Tensor robot(input.robot);

  const HhAttention hh = hh_attention(p, features, input.mask);
  const RhAttention rh = rh_attention(p, hh.output, robot, input.mask);
  const Tensor v_r = relu(add(matmul(robot, p[kRobotW]), p[kRobotB]));

  const Tensor parts[] = {rh.output, v_r};
  const Tensor x = concat_cols(parts);
  const ad::GruParams gru{p[kGruWz], p[kGruUz], p[kGruBz], p[kGruWr], p[kGruUr],
                          p[kGruBr], p[kGruWh], p[kGruUh], p[kGruBh]};
  const Tensor h = gru_cell(x, h_prev, gru);

  PolicyGraph out;
  out.h = h;
  out.value = add(matmul(h, p[kValueW]), p[kValueB]);
  out.mean = add(matmul(h, p[kMeanW]), p[kMeanB]);
  out.log_std = p[kLogStd];
  return out;
}

PolicyOutput PolicyNet::forward(const PolicyInput& input, const Matrix& h_prev) const {
  const auto p = params_.bind(nullptr);
  const PolicyGraph g = forward_graph(p, input, Tensor(h_prev));
  PolicyOutput out;
  out.value = g.value.item();
  out.action_mean = {g.mean(0, 0), g.mean(0, 1)};
  out.action_log_std = {g.log_std(0, 0), g.log_std(0, 1)};
  out.h_next = g.h.value();
  return out;
}

PolicyOutput PolicyNet::forward(const Observation& obs, const Matrix& h_prev) const {
  return forward(make_input(obs, config_.horizon), h_prev);
}

}  // namespace crowdnav::policy
