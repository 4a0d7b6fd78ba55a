#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "crowdnav/geometry.hpp"

namespace crowdnav::predict {

/// Sliding window of the last M+1 observed positions of one human, oldest first.
struct TrackHistory {
  std::vector<Vec2> positions;
  std::vector<bool> valid;

  bool has_valid() const;
  /// Appends one tick. A visible tick after an unobserved one restarts the track.
  void push(const Vec2& position, bool visible, int window);
};

using TrajectoryHistory = std::vector<TrackHistory>;

/// K circles per human slot; slots of unobserved humans are empty.
using PredictedZones = std::vector<std::vector<Disc>>;

/// Access to the simulator's true human futures, used by the oracle predictor.
class GroundTruthSource {
 public:
  virtual ~GroundTruthSource() = default;
  /// futures[i][k-1] = position of human i after k steps, k = 1..horizon.
  virtual std::vector<std::vector<Vec2>> ground_truth_futures(int horizon) const = 0;
};

/// Uniform predictor interface. Implementations must cope with short histories.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual PredictedZones predict(const TrajectoryHistory& history,
                                 const GroundTruthSource& sim, const std::vector<bool>& visible,
                                 double dt, int horizon) const = 0;
  virtual std::string_view name() const = 0;
};

PredictedZones predict_const_vel(const TrajectoryHistory& history, double dt, int horizon,
                                 double zone_radius = 0.3);

PredictedZones predict_oracle(const GroundTruthSource& sim, int horizon,
                              double zone_radius = 0.3);

class ConstVelPredictor final : public Predictor {
 public:
  explicit ConstVelPredictor(double zone_radius = 0.3) : zone_radius_(zone_radius) {}
  PredictedZones predict(const TrajectoryHistory& history, const GroundTruthSource& sim,
                         const std::vector<bool>& visible, double dt,
                         int horizon) const override;
  std::string_view name() const override { return "constvel"; }

 private:
  double zone_radius_;
};

class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(double zone_radius = 0.3) : zone_radius_(zone_radius) {}
  PredictedZones predict(const TrajectoryHistory& history, const GroundTruthSource& sim,
                         const std::vector<bool>& visible, double dt,
                         int horizon) const override;
  std::string_view name() const override { return "oracle"; }

 private:
  double zone_radius_;
};

/// Predicts nothing; observations carry no future positions.
class NullPredictor final : public Predictor {
 public:
  PredictedZones predict(const TrajectoryHistory& history, const GroundTruthSource& sim,
                         const std::vector<bool>& visible, double dt,
                         int horizon) const override;
  std::string_view name() const override { return "none"; }
};

enum class PredictorKind { None, ConstVel, Oracle };

PredictorKind parse_predictor_kind(std::string_view name);
std::string_view to_string(PredictorKind kind);
std::shared_ptr<const Predictor> make_predictor(PredictorKind kind, double zone_radius = 0.3);

}  // namespace crowdnav::predict
