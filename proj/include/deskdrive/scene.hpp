#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "deskdrive/geometry.hpp"

namespace deskdrive {

// One simulation clock everywhere: 10 Hz.
constexpr double kDt = 0.1;
constexpr int kFps = 10;

constexpr double kWheelbase = 2.8;          // m
constexpr double kMaxSteerRad = kPi / 6.0;  // 30 degrees
// Bicycle-model curvature bound, tan(30 deg) / wheelbase ~ 0.206 1/m.
inline double max_curvature() { return std::tan(kMaxSteerRad) / kWheelbase; }
constexpr double kMaxAccel = 8.0;  // m/s^2, both signs

constexpr int kHistorySteps = 30;  // past frames fed to the planner
constexpr int kHorizonSteps = 12;  // predicted future steps (1.2 s)

constexpr double kMetersPerMile = 1609.344;

enum class AgentClass : uint8_t { vehicle = 0, pedestrian = 1, cyclist = 2 };

struct AgentBox {
  int64_t id = 0;
  Pose2 pose;          // box center
  double length = 0.0; // along heading, length >= width > 0
  double width = 0.0;
  Vec2 velocity;       // world frame, m/s
  AgentClass cls = AgentClass::vehicle;

  double speed() const { return velocity.norm(); }
  bool operator==(const AgentBox&) const = default;
};

// Corners at (+-length/2, +-width/2) rotated about the center,
// counter-clockwise starting from the front-left-in-heading corner.
std::array<Vec2, 4> obb_corners(const AgentBox& box);

enum class LightState : uint8_t { green = 0, red = 1, unknown = 2 };

struct TrafficLightState {
  int64_t lane_id = 0;
  LightState state = LightState::unknown;
  bool operator==(const TrafficLightState&) const = default;
};

struct Lane {
  int64_t id = 0;
  std::vector<Vec2> centerline;  // >= 2 points, no repeated consecutive points
  std::vector<Vec2> left_boundary;
  std::vector<Vec2> right_boundary;
  std::vector<int64_t> successors;
  bool operator==(const Lane&) const = default;
};

struct MapLayer {
  std::vector<Lane> lanes;
  std::vector<std::vector<Vec2>> crosswalks;      // simple polygons
  std::vector<std::vector<Vec2>> drivable_area;   // union of simple polygons
  bool operator==(const MapLayer&) const = default;
};

struct SceneFrame {
  double t = 0.0;      // seconds, multiple of 0.1
  AgentBox ego;        // ground-truth ego state
  Pose2 ego_obs;       // ego pose as reported by localization (drifts under
                       // degraded sensors; equals ego.pose in clean logs)
  std::vector<AgentBox> agents;
  std::vector<TrafficLightState> lights;
  bool operator==(const SceneFrame&) const = default;
};

struct LogMeta {
  std::string scenario;
  uint64_t seed = 0;
  std::string sensor = "ground_truth";
  bool operator==(const LogMeta&) const = default;
};

struct DriveLog {
  std::vector<SceneFrame> frames;  // 10 Hz, t strictly increasing by 0.1
  MapLayer map;
  LogMeta meta;

  double duration() const {
    return frames.empty() ? 0.0 : frames.back().t - frames.front().t;
  }
  bool operator==(const DriveLog&) const = default;
};

struct Trajectory {
  std::array<Vec2, kHorizonSteps> points{};  // ego frame, 0.1 s spacing
  bool operator==(const Trajectory&) const = default;
};

// Structural checks used by tests and the generator: timestamps on the 10 Hz
// grid, unique agent ids per frame, positive box extents, map sanity.
void validate_log(const DriveLog& log);

}  // namespace deskdrive
