#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace deskdrive {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }

  bool operator==(const Vec2&) const = default;
};

constexpr double kPi = 3.14159265358979323846;

// Normalize into (-pi, pi].
inline double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // radians in (-pi, pi]

  Vec2 position() const { return {x, y}; }
  Vec2 heading() const { return {std::cos(yaw), std::sin(yaw)}; }

  bool operator==(const Pose2&) const = default;
};

inline Pose2 make_pose(double x, double y, double yaw) {
  return {x, y, normalize_angle(yaw)};
}

// Rigid transform of a world point into the ego frame: rotate by -yaw,
// translate by -position.
inline Vec2 to_ego_frame(const Pose2& ego, const Vec2& p) {
  double dx = p.x - ego.x;
  double dy = p.y - ego.y;
  double c = std::cos(ego.yaw);
  double s = std::sin(ego.yaw);
  return {c * dx + s * dy, -s * dx + c * dy};
}

inline Vec2 from_ego_frame(const Pose2& ego, const Vec2& p) {
  double c = std::cos(ego.yaw);
  double s = std::sin(ego.yaw);
  return {ego.x + c * p.x - s * p.y, ego.y + s * p.x + c * p.y};
}

// Rotation only (for velocities).
inline Vec2 rotate_to_ego(const Pose2& ego, const Vec2& v) {
  double c = std::cos(ego.yaw);
  double s = std::sin(ego.yaw);
  return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

inline Vec2 rotate_from_ego(const Pose2& ego, const Vec2& v) {
  double c = std::cos(ego.yaw);
  double s = std::sin(ego.yaw);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// One kinematic step of length ds under curvature kappa: the new heading is
// applied first, then the position advances along it. Every integrator in
// the project (expert driver, perturbation realignment, simulator) uses this
// same law so their trajectories compose exactly.
inline Pose2 heading_step(const Pose2& p, double kappa, double ds) {
  double yaw = normalize_angle(p.yaw + kappa * ds);
  return {p.x + ds * std::cos(yaw), p.y + ds * std::sin(yaw), yaw};
}

double polyline_length(std::span<const Vec2> poly);

// n points equally spaced by arc length; endpoints preserved exactly.
// Throws std::invalid_argument for degenerate zero-length polylines.
std::vector<Vec2> polyline_resample(std::span<const Vec2> poly, int n);

// n points equally spaced along the closed perimeter, starting at vertex 0.
std::vector<Vec2> ring_resample(std::span<const Vec2> ring, int n);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

double distance_to_polyline(const Vec2& p, std::span<const Vec2> poly);

// Even-odd rule; points on the boundary may land on either side.
bool point_in_polygon(const Vec2& p, std::span<const Vec2> poly);

double distance_to_polygon_boundary(const Vec2& p, std::span<const Vec2> poly);

// Arc position of the closest point on the polyline.
double project_onto_polyline(const Vec2& p, std::span<const Vec2> poly);

// Point at arc position s (clamped to [0, length]).
Vec2 polyline_point_at(std::span<const Vec2> poly, double s);

}  // namespace deskdrive
