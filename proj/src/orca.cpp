#include "crowdnav/orca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crowdnav::orca {
namespace {

constexpr double kEpsilon = 1e-10;

// Boundary line with the permitted side on the left of `direction`.
struct Line {
  Vec2 point;
  Vec2 direction;
};

Line to_line(const HalfPlane& h) { return {h.point, h.direction()}; }

// Optimum restricted to line `line_no` given lines [0, line_no).
bool program_on_line(const std::vector<Line>& lines, std::size_t line_no, double radius,
                     const Vec2& opt, bool direction_opt, Vec2& result) {
  const Line& line = lines[line_no];
  const double dot_product = dot(line.point, line.direction);
  const double discriminant = dot_product * dot_product + radius * radius - abs_sq(line.point);
  if (discriminant < 0.0) return false;  // line misses the speed disc

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = det(line.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, line.point - lines[i].point);
    if (std::fabs(denominator) <= kEpsilon) {
      if (numerator < 0.0) return false;  // parallel and outside
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = line.point + (dot(opt, line.direction) > 0.0 ? t_right : t_left) * line.direction;
  } else {
    const double t = std::clamp(dot(line.direction, opt - line.point), t_left, t_right);
    result = line.point + t * line.direction;
  }
  return true;
}

// Incremental 2D program; returns the index of the first line that could not
// be satisfied, or lines.size() on success.
std::size_t program_2d(const std::vector<Line>& lines, double radius, const Vec2& opt,
                       bool direction_opt, Vec2& result) {
  if (direction_opt) {
    result = opt * radius;
  } else if (abs_sq(opt) > radius * radius) {
    result = normalized(opt) * radius;
  } else {
    result = opt;
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 previous = result;
      if (!program_on_line(lines, i, radius, opt, direction_opt, result)) {
        result = previous;
        return i;
      }
    }
  }
  return lines.size();
}

// Least-violation fallback: minimizes the largest distance by which any
// constraint from `begin_line` on is violated.
void program_3d(const std::vector<Line>& lines, std::size_t begin_line, double radius,
                Vec2& result) {
  double worst = 0.0;
  for (std::size_t i = begin_line; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) <= worst) continue;

    std::vector<Line> projected;
    projected.reserve(i);
    for (std::size_t j = 0; j < i; ++j) {
      Line line;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::fabs(determinant) <= kEpsilon) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;  // same direction
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (det(lines[j].direction, lines[i].point - lines[j].point) / determinant) *
                         lines[i].direction;
      }
      line.direction = normalized(lines[j].direction - lines[i].direction);
      projected.push_back(line);
    }

    const Vec2 previous = result;
    const Vec2 push{-lines[i].direction.y, lines[i].direction.x};
    if (program_2d(projected, radius, push, true, result) < projected.size()) {
      // Only numerical round-off gets here; keep the previous optimum.
      result = previous;
    }
    worst = det(lines[i].direction, lines[i].point - result);
  }
}

}  // namespace

HalfPlane orca_halfplane(const AgentState& self, const AgentState& other, double time_horizon,
                         double dt) {
  const Vec2 rel_pos = other.position - self.position;
  const Vec2 rel_vel = self.velocity - other.velocity;
  const double dist_sq = abs_sq(rel_pos);
  const double combined_radius = self.radius + other.radius;
  const double combined_radius_sq = combined_radius * combined_radius;

  Vec2 direction;
  Vec2 u;

  if (dist_sq > combined_radius_sq) {
    const double inv_tau = 1.0 / time_horizon;
    const Vec2 w = rel_vel - inv_tau * rel_pos;
    const double w_len_sq = abs_sq(w);
    const double dot1 = dot(w, rel_pos);

    if (dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq) {
      // Closest boundary point lies on the cut-off circle.
      const double w_len = std::sqrt(w_len_sq);
      const Vec2 unit_w = w / w_len;
      direction = {unit_w.y, -unit_w.x};
      u = (combined_radius * inv_tau - w_len) * unit_w;
    } else {
      // Closest boundary point lies on one of the cone legs.
      const double leg = std::sqrt(dist_sq - combined_radius_sq);
      if (det(rel_pos, w) > 0.0) {
        direction = Vec2{rel_pos.x * leg - rel_pos.y * combined_radius,
                         rel_pos.x * combined_radius + rel_pos.y * leg} /
                    dist_sq;
      } else {
        direction = -Vec2{rel_pos.x * leg + rel_pos.y * combined_radius,
                          -rel_pos.x * combined_radius + rel_pos.y * leg} /
                    dist_sq;
      }
      u = dot(rel_vel, direction) * direction - rel_vel;
    }
  } else {
    // Already overlapping: resolve within one step.
    const double inv_dt = 1.0 / dt;
    const Vec2 w = rel_vel - inv_dt * rel_pos;
    const double w_len = norm(w);
    Vec2 unit_w;
    if (w_len > 0.0) {
      unit_w = w / w_len;
    } else if (dist_sq > 0.0) {
      unit_w = -normalized(rel_pos);
    } else {
      unit_w = {-1.0, 0.0};
    }
    direction = {unit_w.y, -unit_w.x};
    u = (combined_radius * inv_dt - w_len) * unit_w;
  }

  HalfPlane plane;
  plane.point = self.velocity + 0.5 * u;
  plane.normal = normalized(Vec2{-direction.y, direction.x});
  return plane;
}

Vec2 linear_program_2d(std::span<const HalfPlane> constraints, const Vec2& preferred,
                       double v_max) {
  std::vector<Line> lines;
  lines.reserve(constraints.size());
  for (const auto& c : constraints) lines.push_back(to_line(c));

  Vec2 result;
  const std::size_t failed = program_2d(lines, v_max, preferred, false, result);
  if (failed < lines.size()) program_3d(lines, failed, v_max, result);
  return clamp_norm(result, v_max);
}

Vec2 orca_velocity(const AgentState& self, std::span<const AgentState> neighbors,
                   const OrcaParams& params, double dt) {
  const double range_sq = params.neighbor_dist * params.neighbor_dist;

  std::vector<std::size_t> order;
  order.reserve(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (abs_sq(neighbors[i].position - self.position) < range_sq) order.push_back(i);
  }
  // Nearest first; ties keep input order.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return abs_sq(neighbors[a].position - self.position) <
           abs_sq(neighbors[b].position - self.position);
  });
  if (order.size() > static_cast<std::size_t>(std::max(params.max_neighbors, 0))) {
    order.resize(static_cast<std::size_t>(std::max(params.max_neighbors, 0)));
  }

  std::vector<HalfPlane> planes;
  planes.reserve(order.size());
  for (std::size_t idx : order) {
    planes.push_back(orca_halfplane(self, neighbors[idx], params.time_horizon, dt));
  }
  return linear_program_2d(planes, preferred_velocity(self, dt), self.v_max);
}

}  // namespace crowdnav::orca
