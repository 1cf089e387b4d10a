#include "deskdrive/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deskdrive {

namespace {

// Projection radius of a box onto a unit axis.
double project_extent(const AgentBox& b, const Vec2& axis) {
  Vec2 u = b.pose.heading();
  Vec2 v{-u.y, u.x};
  return 0.5 * b.length * std::abs(u.dot(axis)) +
         0.5 * b.width * std::abs(v.dot(axis));
}

}  // namespace

double obb_overlap_depth(const AgentBox& a, const AgentBox& b) {
  Vec2 ua = a.pose.heading();
  Vec2 ub = b.pose.heading();
  std::array<Vec2, 4> axes = {ua, Vec2{-ua.y, ua.x}, ub, Vec2{-ub.y, ub.x}};
  Vec2 d = b.pose.position() - a.pose.position();
  double depth = std::numeric_limits<double>::infinity();
  for (const Vec2& axis : axes) {
    double overlap = project_extent(a, axis) + project_extent(b, axis) -
                     std::abs(d.dot(axis));
    depth = std::min(depth, overlap);
  }
  return depth;
}

bool obb_intersect(const AgentBox& a, const AgentBox& b) {
  return obb_overlap_depth(a, b) > 0.0;
}

EventKind classify_collision(const AgentBox& ego, const AgentBox& other) {
  if (!obb_intersect(ego, other))
    throw std::invalid_argument("classify_collision: boxes do not intersect");
  Vec2 rel = to_ego_frame(ego.pose, other.pose.position());
  double bearing = std::abs(std::atan2(rel.y, rel.x));
  if (bearing <= kPi / 4.0) return EventKind::front_collision;
  if (bearing >= 3.0 * kPi / 4.0) return EventKind::rear_collision;
  return EventKind::side_collision;
}

bool off_road(const AgentBox& ego, const MapLayer& map) {
  for (const Vec2& corner : obb_corners(ego)) {
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& poly : map.drivable_area) {
      if (point_in_polygon(corner, poly)) {
        dist = 0.0;
        break;
      }
      dist = std::min(dist, distance_to_polygon_boundary(corner, poly));
    }
    if (dist > kOffRoadTolerance) return true;
  }
  return false;
}

double mean_l2(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("mean_l2: length mismatch");
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm();
  return sum / static_cast<double>(a.size());
}

double i1k(size_t event_count, double miles) {
  if (miles <= 0.0) throw std::invalid_argument("i1k: miles must be > 0");
  return static_cast<double>(event_count) / miles * 1000.0;
}

EvalReport aggregate(std::span<const EvalStats> per_seed,
                     std::span<const uint64_t> seeds) {
  if (per_seed.empty()) throw std::invalid_argument("aggregate: no reports");
  const int n = static_cast<int>(per_seed.size());
  auto fields = [](EvalStats& s) {
    return std::array<double*, 7>{&s.front_per_1k, &s.side_per_1k,
                                  &s.rear_per_1k,  &s.offroad_per_1k,
                                  &s.l2_m,         &s.i1k,
                                  &s.miles};
  };
  auto values = [](const EvalStats& s) {
    return std::array<double, 7>{s.front_per_1k, s.side_per_1k, s.rear_per_1k,
                                 s.offroad_per_1k, s.l2_m, s.i1k, s.miles};
  };
  EvalReport rep;
  rep.n_seeds = n;
  rep.seeds.assign(seeds.begin(), seeds.end());
  auto mean_out = fields(rep.mean);
  auto std_out = fields(rep.stddev);
  for (int k = 0; k < 7; ++k) {
    double sum = 0.0;
    for (const EvalStats& s : per_seed) sum += values(s)[k];
    double mean = sum / n;
    *mean_out[k] = mean;
    double sq = 0.0;
    if (n >= 2) {
      for (const EvalStats& s : per_seed) {
        double d = values(s)[k] - mean;
        sq += d * d;
      }
      sq = std::sqrt(sq / (n - 1));
    }
    *std_out[k] = sq;
  }
  return rep;
}

}  // namespace deskdrive
