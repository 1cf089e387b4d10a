#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "deskdrive/scene.hpp"

namespace deskdrive {

enum class ScenarioKind : int {
  free_flow = 0,
  lead_vehicle_slowdown = 1,
  stopped_lead = 2,
  jaywalker = 3,
  traffic_light_stop = 4,
  curved_road = 5,
  dense_peloton = 6,
};
constexpr int kScenarioKindCount = 7;

const char* to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::free_flow;
  uint64_t seed = 0;
  double duration = 15.0;  // seconds, in [10, 25]
  int agent_count = 2;     // background agents in the adjacent lane
};

// Intelligent Driver Model parameters for the scripted expert and the
// scripted traffic it follows.
struct IdmParams {
  double v0 = 10.0;        // desired speed, m/s
  double T_headway = 1.5;  // s
  double a_max = 1.5;      // m/s^2
  double b_comf = 2.0;     // m/s^2
  double s0 = 2.0;         // jam distance, m
  double delta = 4.0;
};

// IDM acceleration, clamped to [-8, a_max]. Throws if gap <= 0.
double idm_accel(double gap, double v, double v_lead, const IdmParams& p);

// Pure-pursuit curvature command toward the point on `path` at Euclidean
// distance `lookahead` ahead of the closest point. |result| is clamped to
// the bicycle-model bound. Throws if the pose is further than 3x the
// lookahead from the path.
double pure_pursuit_curvature(const Pose2& pose, std::span<const Vec2> path,
                              double lookahead);

// Deterministic per (seed, kind). Two same-direction lanes, straight or
// constant curvature, with a crosswalk (and a signal for the light kind).
MapLayer gen_map(uint64_t seed, ScenarioKind kind);

// Scripted expert demonstration: IDM + pure pursuit ego, kind-specific
// traffic, 10 Hz, collision-free ground truth. Deterministic per spec.
// Throws after 10 internal retries if the no-collision constraint cannot
// be met.
DriveLog gen_log(const ScenarioSpec& spec);

std::array<double, kScenarioKindCount> default_scenario_mix();

// Snippets with durations uniform in [10, 25] s until the accumulated
// duration reaches total_hours; kinds drawn from `mix` (weights must sum
// to 1). Snippet seeds derive from `seed`; generation parallelizes across
// snippets.
std::vector<DriveLog> gen_dataset(double total_hours,
                                  std::span<const double> mix, uint64_t seed);

}  // namespace deskdrive
