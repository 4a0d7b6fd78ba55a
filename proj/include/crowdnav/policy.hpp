#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "crowdnav/geometry.hpp"
#include "crowdnav/sim.hpp"
#include "crowdnav/tensor.hpp"

namespace crowdnav::policy {

inline constexpr std::size_t kRobotFeatures = 9;

struct PolicyConfig {
  int horizon = 5;      // K predicted positions per human
  int max_humans = 20;  // human slots
  int d_hh = 64;
  int hh_heads = 8;
  int d_rh = 64;
  int d_r = 64;
  int d_h = 128;
  double init_log_std = 0.0;
  std::uint64_t init_seed = 1;

  std::size_t feature_width() const { return 2 * static_cast<std::size_t>(horizon + 1); }
  void validate() const;
};

/// Network inputs for one step, in the robot-centric frame.
struct PolicyInput {
  ad::Matrix humans;         // slots x 2(K+1); masked rows are zero
  std::vector<bool> mask;    // visibility per slot
  ad::Matrix robot;          // 1 x 9
};

struct PolicyOutput {
  double value = 0.0;
  Vec2 action_mean;
  std::pair<double, double> action_log_std;
  ad::Matrix h_next;
};

/// Outputs still attached to the graph, for training.
struct PolicyGraph {
  ad::Tensor value;    // 1x1
  ad::Tensor mean;     // 1x2
  ad::Tensor log_std;  // 1x2
  ad::Tensor h;        // 1 x d_h
};

struct HhAttention {
  std::vector<ad::Tensor> weights;  // per head, slots x slots
  ad::Tensor mixed;                 // concatenated head outputs before projection
  ad::Tensor output;                // v_HH, slots x d_hh
};

struct RhAttention {
  ad::Tensor weights;  // 1 x slots
  ad::Tensor value;    // V_RH, slots x d_rh
  ad::Tensor output;   // v_RH, 1 x d_rh
};

/// Row i = [u_i^t, predicted u_i^{t+1..t+K}] relative to the robot position.
/// Invisible slots are zero rows with mask false.
std::pair<ad::Matrix, std::vector<bool>> build_human_features(const Observation& obs, int horizon);

/// [0, 0, vx, vy, gx - px, gy - py, v_max, heading, radius].
ad::Matrix build_robot_features(const AgentState& robot);

PolicyInput make_input(const Observation& obs, int horizon);

/// Diagonal Gaussian log density of `action`.
double gaussian_log_prob(const Vec2& action, const Vec2& mean, std::pair<double, double> log_std);
double gaussian_entropy(std::pair<double, double> log_std);

/// Same quantities on the graph.
ad::Tensor gaussian_log_prob(const ad::Matrix& action, const ad::Tensor& mean,
                             const ad::Tensor& log_std);
ad::Tensor gaussian_entropy(const ad::Tensor& log_std);

/// Draws a raw (unclamped) action and its log-probability.
std::pair<Vec2, double> sample_action(const PolicyOutput& out, std::mt19937_64& rng);

/// Spatio-temporal interaction-graph policy: human-human attention, then
/// robot-human attention, then a GRU and two linear heads.
class PolicyNet {
 public:
  explicit PolicyNet(PolicyConfig config);

  const PolicyConfig& config() const { return config_; }
  const ad::ParameterSet& parameters() const { return params_; }
  ad::ParameterSet& parameters() { return params_; }

  ad::Matrix initial_state() const;

  HhAttention hh_attention(const std::vector<ad::Tensor>& p, const ad::Tensor& features,
                           const std::vector<bool>& mask) const;
  RhAttention rh_attention(const std::vector<ad::Tensor>& p, const ad::Tensor& v_hh,
                           const ad::Tensor& robot, const std::vector<bool>& mask) const;
  /// Full forward pass with parameters bound by ParameterSet::bind().
  PolicyGraph forward_graph(const std::vector<ad::Tensor>& p, const PolicyInput& input,
                            const ad::Tensor& h_prev) const;

  PolicyOutput forward(const PolicyInput& input, const ad::Matrix& h_prev) const;
  PolicyOutput forward(const Observation& obs, const ad::Matrix& h_prev) const;

  // Parameter slots, in registration order.
  enum Slot : std::size_t {
    kHhQuery,
    kHhKey,
    kHhValue,
    kHhOut,
    kHhOutBias,
    kRhQuery,
    kRhKey,
    kRhValue,
    kRobotW,
    kRobotB,
    kGruWz,
    kGruUz,
    kGruBz,
    kGruWr,
    kGruUr,
    kGruBr,
    kGruWh,
    kGruUh,
    kGruBh,
    kValueW,
    kValueB,
    kMeanW,
    kMeanB,
    kLogStd,
    kSlotCount
  };

 private:
  PolicyConfig config_;
  ad::ParameterSet params_;
};

}  // namespace crowdnav::policy
