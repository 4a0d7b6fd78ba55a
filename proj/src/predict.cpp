#include "crowdnav/predict.hpp"

#include <stdexcept>
#include <string>

namespace crowdnav::predict {

bool TrackHistory::has_valid() const {
  for (bool v : valid) {
    if (v) return true;
  }
  return false;
}

void TrackHistory::push(const Vec2& position, bool visible, int window) {
  if (visible && (valid.empty() || !valid.back())) {
    positions.clear();
    valid.clear();
  }
  positions.push_back(visible ? position : Vec2{});
  valid.push_back(visible);
  const auto cap = static_cast<std::size_t>(window);
  if (positions.size() > cap) {
    const auto excess = static_cast<std::ptrdiff_t>(positions.size() - cap);
    positions.erase(positions.begin(), positions.begin() + excess);
    valid.erase(valid.begin(), valid.begin() + excess);
  }
}

PredictedZones predict_const_vel(const TrajectoryHistory& history, double dt, int horizon,
                                 double zone_radius) {
  PredictedZones zones(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& track = history[i];
    if (!track.has_valid() || horizon <= 0) continue;

    // Last two valid entries, newest first.
    int last = -1;
    int prev = -1;
    for (int j = static_cast<int>(track.valid.size()) - 1; j >= 0; --j) {
      if (!track.valid[static_cast<std::size_t>(j)]) continue;
      if (last < 0) {
        last = j;
      } else {
        prev = j;
        break;
      }
    }
    const Vec2 anchor = track.positions[static_cast<std::size_t>(last)];
    Vec2 velocity;
    if (prev >= 0) {
      velocity = (anchor - track.positions[static_cast<std::size_t>(prev)]) /
                 (static_cast<double>(last - prev) * dt);
    }
    zones[i].reserve(static_cast<std::size_t>(horizon));
    for (int k = 1; k <= horizon; ++k) {
      zones[i].push_back({anchor + velocity * (static_cast<double>(k) * dt), zone_radius});
    }
  }
  return zones;
}

PredictedZones predict_oracle(const GroundTruthSource& sim, int horizon, double zone_radius) {
  if (horizon <= 0) return {};
  const auto futures = sim.ground_truth_futures(horizon);
  PredictedZones zones(futures.size());
  for (std::size_t i = 0; i < futures.size(); ++i) {
    for (const auto& p : futures[i]) zones[i].push_back({p, zone_radius});
  }
  return zones;
}

namespace {

void drop_invisible(PredictedZones& zones, const std::vector<bool>& visible) {
  if (zones.size() < visible.size()) zones.resize(visible.size());
  for (std::size_t i = 0; i < zones.size(); ++i) {
    if (i >= visible.size() || !visible[i]) zones[i].clear();
  }
}

}  // namespace

PredictedZones ConstVelPredictor::predict(const TrajectoryHistory& history,
                                          const GroundTruthSource&,
                                          const std::vector<bool>& visible, double dt,
                                          int horizon) const {
  auto zones = predict_const_vel(history, dt, horizon, zone_radius_);
  drop_invisible(zones, visible);
  return zones;
}

PredictedZones OraclePredictor::predict(const TrajectoryHistory&, const GroundTruthSource& sim,
                                        const std::vector<bool>& visible, double,
                                        int horizon) const {
  auto zones = predict_oracle(sim, horizon, zone_radius_);
  drop_invisible(zones, visible);
  return zones;
}

PredictedZones NullPredictor::predict(const TrajectoryHistory& history, const GroundTruthSource&,
                                      const std::vector<bool>&, double, int) const {
  return PredictedZones(history.size());
}

PredictorKind parse_predictor_kind(std::string_view name) {
  if (name == "none") return PredictorKind::None;
  if (name == "constvel") return PredictorKind::ConstVel;
  if (name == "oracle") return PredictorKind::Oracle;
  throw std::invalid_argument("unknown predictor '" + std::string(name) + "'");
}

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::None:
      return "none";
    case PredictorKind::ConstVel:
      return "constvel";
    case PredictorKind::Oracle:
      return "oracle";
  }
  return "none";
}

std::shared_ptr<const Predictor> make_predictor(PredictorKind kind, double zone_radius) {
  switch (kind) {
    case PredictorKind::ConstVel:
      return std::make_shared<ConstVelPredictor>(zone_radius);
    case PredictorKind::Oracle:
      return std::make_shared<OraclePredictor>(zone_radius);
    case PredictorKind::None:
      break;
  }
  return std::make_shared<NullPredictor>();
}

}  // namespace crowdnav::predict
