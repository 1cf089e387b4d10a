#include "deskdrive/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace deskdrive {

double polyline_length(std::span<const Vec2> poly) {
  double len = 0.0;
  for (size_t i = 1; i < poly.size(); ++i) len += (poly[i] - poly[i - 1]).norm();
  return len;
}

std::vector<Vec2> polyline_resample(std::span<const Vec2> poly, int n) {
  if (n < 2) throw std::invalid_argument("polyline_resample: n must be >= 2");
  if (poly.size() < 2)
    throw std::invalid_argument("polyline_resample: need >= 2 points");
  double total = polyline_length(poly);
  if (total <= 0.0)
    throw std::invalid_argument("polyline_resample: zero-length polyline");

  std::vector<Vec2> out(static_cast<size_t>(n));
  out.front() = poly.front();
  out.back() = poly.back();

  size_t seg = 0;
  double seg_start = 0.0;
  double seg_len = (poly[1] - poly[0]).norm();
  for (int i = 1; i < n - 1; ++i) {
    double target = total * static_cast<double>(i) / (n - 1);
    while (seg_start + seg_len < target && seg + 2 < poly.size()) {
      seg_start += seg_len;
      ++seg;
      seg_len = (poly[seg + 1] - poly[seg]).norm();
    }
    double u = seg_len > 0.0 ? (target - seg_start) / seg_len : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    out[static_cast<size_t>(i)] = poly[seg] + (poly[seg + 1] - poly[seg]) * u;
  }
  return out;
}

std::vector<Vec2> ring_resample(std::span<const Vec2> ring, int n) {
  if (n < 3) throw std::invalid_argument("ring_resample: n must be >= 3");
  if (ring.size() < 3)
    throw std::invalid_argument("ring_resample: need >= 3 vertices");
  std::vector<Vec2> closed(ring.begin(), ring.end());
  if (!(closed.front() == closed.back())) closed.push_back(closed.front());
  double total = polyline_length(closed);
  if (total <= 0.0) throw std::invalid_argument("ring_resample: degenerate ring");

  std::vector<Vec2> out(static_cast<size_t>(n));
  out[0] = closed.front();
  size_t seg = 0;
  double seg_start = 0.0;
  double seg_len = (closed[1] - closed[0]).norm();
  for (int i = 1; i < n; ++i) {
    double target = total * static_cast<double>(i) / n;
    while (seg_start + seg_len < target && seg + 2 < closed.size()) {
      seg_start += seg_len;
      ++seg;
      seg_len = (closed[seg + 1] - closed[seg]).norm();
    }
    double u = seg_len > 0.0 ? (target - seg_start) / seg_len : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    out[static_cast<size_t>(i)] = closed[seg] + (closed[seg + 1] - closed[seg]) * u;
  }
  return out;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.norm2();
  if (len2 <= 0.0) return (p - a).norm();
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

double distance_to_polyline(const Vec2& p, std::span<const Vec2> poly) {
  if (poly.empty()) return std::numeric_limits<double>::infinity();
  if (poly.size() == 1) return (p - poly[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 1; i < poly.size(); ++i)
    best = std::min(best, point_segment_distance(p, poly[i - 1], poly[i]));
  return best;
}

bool point_in_polygon(const Vec2& p, std::span<const Vec2> poly) {
  bool inside = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double distance_to_polygon_boundary(const Vec2& p, std::span<const Vec2> poly) {
  double best = std::numeric_limits<double>::infinity();
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++)
    best = std::min(best, point_segment_distance(p, poly[j], poly[i]));
  return best;
}

double project_onto_polyline(const Vec2& p, std::span<const Vec2> poly) {
  double best = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double s = 0.0;
  for (size_t i = 1; i < poly.size(); ++i) {
    Vec2 a = poly[i - 1];
    Vec2 ab = poly[i] - a;
    double len2 = ab.norm2();
    double len = std::sqrt(len2);
    double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    double d = (p - (a + ab * t)).norm();
    if (d < best) {
      best = d;
      best_s = s + t * len;
    }
    s += len;
  }
  return best_s;
}

Vec2 polyline_point_at(std::span<const Vec2> poly, double s) {
  if (poly.empty()) return {};
  if (s <= 0.0) return poly.front();
  double acc = 0.0;
  for (size_t i = 1; i < poly.size(); ++i) {
    double seg = (poly[i] - poly[i - 1]).norm();
    if (acc + seg >= s && seg > 0.0) {
      double u = (s - acc) / seg;
      return poly[i - 1] + (poly[i] - poly[i - 1]) * u;
    }
    acc += seg;
  }
  return poly.back();
}

}  // namespace deskdrive
