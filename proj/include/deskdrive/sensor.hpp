#pragma once

#include <string>

#include "deskdrive/scene.hpp"

namespace deskdrive {

// One fidelity level: field of view / range clipping plus detection
// dropout, detection noise, false positives, and an ego-localization
// random walk.
struct SensorConfig {
  std::string label = "identity";
  double fov_deg = 360.0;        // wedge centered on the ego heading
  double range_m = 1e6;
  double dropout_base = 0.0;     // probability per agent-frame
  double pos_noise_base = 0.0;   // sigma at distance 0, m
  double pos_noise_slope = 0.0;  // extra sigma per meter of distance
  double yaw_noise_deg = 0.0;
  double false_pos_per_min = 0.0;
  double loc_drift_sigma = 0.0;  // m / sqrt(s) ego random walk
};

SensorConfig hd_sensor_config();
SensorConfig vision_sensor_config();
// The vision geometry (FOV / range) with every noise source zeroed.
SensorConfig sim_vision_sensor_config();
SensorConfig sensor_config_by_name(const std::string& name);

// True iff the point is within the FOV wedge and the range, measured from
// the true ego pose. Agents are visible iff their box center passes.
bool in_fov(const Pose2& ego, const Vec2& p, const SensorConfig& cfg);

// Distance-dependent dropout probability: the base rate plus a recall
// fade over the outer 20% of the range.
double dropout_probability(double distance, const SensorConfig& cfg);

// Applies FOV/range clipping, dropout, detection noise and false positives
// to one frame, and offsets the observed ego pose by `drift`. Per-agent
// randomness derives from (frame_seed, agent id) so the result does not
// depend on evaluation order.
SceneFrame degrade_frame(const SceneFrame& frame, const SensorConfig& cfg,
                         uint64_t frame_seed, const Vec2& drift = {});

// Frame-wise degradation with one localization drift walk across the log.
// Ground-truth ego state is retained on every frame (it is the supervision
// source); only the observed pose and the agent list degrade.
DriveLog degrade_log(const DriveLog& log, const SensorConfig& cfg,
                     uint64_t seed);

// False positives get ids in this range; real agents never do.
constexpr int64_t kFalsePositiveIdBase = 1000000;

// A frame counts as defective when a true in-FOV agent was dropped or a
// false positive is present. Returns the fraction of defective frames.
double perception_defect_fraction(const DriveLog& truth,
                                  const DriveLog& degraded,
                                  const SensorConfig& cfg);

}  // namespace deskdrive
