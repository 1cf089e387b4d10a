#pragma once

#include <span>
#include <vector>

#include "deskdrive/scene.hpp"

namespace deskdrive {

enum class EventKind : uint8_t {
  front_collision = 0,
  side_collision = 1,
  rear_collision = 2,
  off_road = 3,
};

struct SafetyEvent {
  EventKind kind = EventKind::front_collision;
  double t = 0.0;
  int segment_id = 0;
  int64_t other_agent = -1;  // collisions only
};

// Separating-axis test over the 4 box axes. Touching edges (zero-area
// overlap) count as non-intersecting.
bool obb_intersect(const AgentBox& a, const AgentBox& b);

// Signed overlap depth: positive = penetration, negative = separation gap.
// Used by tests to exclude the ambiguous boundary band.
double obb_overlap_depth(const AgentBox& a, const AgentBox& b);

// Bearing-based: |bearing| <= 45 deg front, >= 135 deg rear, else side.
// Throws if the boxes do not intersect.
EventKind classify_collision(const AgentBox& ego, const AgentBox& other);

// True iff any ego corner lies outside the union of drivable polygons by
// more than 0.1 m.
bool off_road(const AgentBox& ego, const MapLayer& map);
constexpr double kOffRoadTolerance = 0.1;

// Mean Euclidean distance between paired positions.
double mean_l2(std::span<const Vec2> a, std::span<const Vec2> b);

// Events per 1000 miles. Throws if miles <= 0.
double i1k(size_t event_count, double miles);

// Closed-loop evaluation result for one (model, test set, seed) cell.
struct EvalStats {
  double front_per_1k = 0.0;
  double side_per_1k = 0.0;
  double rear_per_1k = 0.0;
  double offroad_per_1k = 0.0;
  double l2_m = 0.0;
  double i1k = 0.0;
  double miles = 0.0;
};

struct EvalReport {
  EvalStats mean;
  EvalStats stddev;  // sample std (n-1); meaningful only when n_seeds >= 2
  int n_seeds = 0;
  std::vector<uint64_t> seeds;
};

// Per-metric mean and sample standard deviation across seeds.
EvalReport aggregate(std::span<const EvalStats> per_seed,
                     std::span<const uint64_t> seeds);

}  // namespace deskdrive
