#include "deskdrive/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "deskdrive/rng.hpp"

namespace deskdrive {

SensorConfig hd_sensor_config() {
  SensorConfig cfg;
  cfg.label = "hd";
  cfg.fov_deg = 360.0;
  cfg.range_m = 120.0;
  cfg.dropout_base = 0.005;
  cfg.pos_noise_base = 0.1;
  cfg.pos_noise_slope = 0.0;
  cfg.yaw_noise_deg = 2.0;
  cfg.false_pos_per_min = 0.0;
  cfg.loc_drift_sigma = 0.01;
  return cfg;
}

SensorConfig vision_sensor_config() {
  SensorConfig cfg;
  cfg.label = "vision";
  cfg.fov_deg = 160.0;
  cfg.range_m = 60.0;
  cfg.dropout_base = 0.05;
  cfg.pos_noise_base = 0.2;
  cfg.pos_noise_slope = 0.01;
  cfg.yaw_noise_deg = 7.0;
  cfg.false_pos_per_min = 2.0;
  cfg.loc_drift_sigma = 0.05;
  return cfg;
}

SensorConfig sim_vision_sensor_config() {
  SensorConfig cfg = vision_sensor_config();
  cfg.label = "sim_vision";
  cfg.dropout_base = 0.0;
  cfg.pos_noise_base = 0.0;
  cfg.pos_noise_slope = 0.0;
  cfg.yaw_noise_deg = 0.0;
  cfg.false_pos_per_min = 0.0;
  cfg.loc_drift_sigma = 0.0;
  return cfg;
}

SensorConfig sensor_config_by_name(const std::string& name) {
  if (name == "hd") return hd_sensor_config();
  if (name == "vision") return vision_sensor_config();
  if (name == "sim_vision") return sim_vision_sensor_config();
  if (name == "identity") return SensorConfig{};
  throw std::invalid_argument("unknown sensor config: " + name);
}

bool in_fov(const Pose2& ego, const Vec2& p, const SensorConfig& cfg) {
  Vec2 rel = to_ego_frame(ego, p);
  double dist = rel.norm();
  if (dist > cfg.range_m) return false;
  double bearing = std::abs(std::atan2(rel.y, rel.x));
  return bearing <= 0.5 * cfg.fov_deg * kPi / 180.0;
}

double dropout_probability(double distance, const SensorConfig& cfg) {
  double fade = std::max(0.0, (distance - 0.8 * cfg.range_m) / (0.2 * cfg.range_m));
  return cfg.dropout_base + 0.3 * fade;
}

SceneFrame degrade_frame(const SceneFrame& frame, const SensorConfig& cfg,
                         uint64_t frame_seed, const Vec2& drift) {
  SceneFrame out = frame;
  if (drift.x != 0.0 || drift.y != 0.0) {
    out.ego_obs.x = frame.ego_obs.x + drift.x;
    out.ego_obs.y = frame.ego_obs.y + drift.y;
  }

  const Pose2& ego = frame.ego.pose;  // the sensor sits on the true vehicle
  out.agents.clear();
  for (const AgentBox& a : frame.agents) {
    if (!in_fov(ego, a.pose.position(), cfg)) continue;
    double dist = (a.pose.position() - ego.position()).norm();
    Rng agent_rng(substream(frame_seed, stream_tag::kAgent,
                            static_cast<uint64_t>(a.id)));
    if (agent_rng.uniform01() < dropout_probability(dist, cfg)) continue;
    AgentBox obs = a;
    double sigma = cfg.pos_noise_base + cfg.pos_noise_slope * dist;
    if (sigma > 0.0) {
      obs.pose.x = a.pose.x + sigma * agent_rng.normal();
      obs.pose.y = a.pose.y + sigma * agent_rng.normal();
    }
    if (cfg.yaw_noise_deg > 0.0)
      obs.pose.yaw = normalize_angle(
          a.pose.yaw + cfg.yaw_noise_deg * kPi / 180.0 * agent_rng.normal());
    out.agents.push_back(obs);
  }

  Rng fp_rng(substream(frame_seed, stream_tag::kFalsePositive));
  int n_fp = fp_rng.poisson(cfg.false_pos_per_min / 600.0);
  for (int k = 0; k < n_fp; ++k) {
    double half_fov = 0.5 * cfg.fov_deg * kPi / 180.0;
    double bearing = fp_rng.uniform(-half_fov, half_fov);
    double radius = cfg.range_m * std::sqrt(fp_rng.uniform01());
    Vec2 rel{radius * std::cos(bearing), radius * std::sin(bearing)};
    AgentBox fp;
    fp.id = kFalsePositiveIdBase + k;
    Vec2 pos = from_ego_frame(ego, rel);
    fp.pose = make_pose(pos.x, pos.y, fp_rng.uniform(-kPi, kPi));
    fp.length = 4.5;
    fp.width = 2.0;
    fp.velocity = {0.0, 0.0};
    fp.cls = AgentClass::vehicle;
    out.agents.push_back(fp);
  }
  return out;
}

DriveLog degrade_log(const DriveLog& log, const SensorConfig& cfg,
                     uint64_t seed) {
  DriveLog out;
  out.map = log.map;
  out.meta = log.meta;
  out.meta.sensor = cfg.label;
  out.frames.resize(log.frames.size());

  // one localization random walk per log, stepped frame by frame
  std::vector<Vec2> drift(log.frames.size());
  Rng walk(substream(seed, stream_tag::kDrift));
  Vec2 d{0.0, 0.0};
  double step_sigma = cfg.loc_drift_sigma * std::sqrt(kDt);
  for (size_t i = 0; i < log.frames.size(); ++i) {
    d.x += step_sigma * walk.normal();
    d.y += step_sigma * walk.normal();
    drift[i] = d;
  }

#pragma omp parallel for schedule(static)
  for (size_t i = 0; i < log.frames.size(); ++i) {
    uint64_t frame_seed = substream(seed, stream_tag::kFrame, i);
    out.frames[i] = degrade_frame(log.frames[i], cfg, frame_seed, drift[i]);
  }
  return out;
}

double perception_defect_fraction(const DriveLog& truth,
                                  const DriveLog& degraded,
                                  const SensorConfig& cfg) {
  if (truth.frames.size() != degraded.frames.size())
    throw std::invalid_argument("defect_fraction: frame count mismatch");
  size_t defective = 0;
  for (size_t i = 0; i < truth.frames.size(); ++i) {
    const SceneFrame& t = truth.frames[i];
    const SceneFrame& d = degraded.frames[i];
    bool defect = false;
    for (const AgentBox& a : d.agents)
      if (a.id >= kFalsePositiveIdBase) defect = true;
    for (const AgentBox& a : t.agents) {
      if (!in_fov(t.ego.pose, a.pose.position(), cfg)) continue;
      bool present = false;
      for (const AgentBox& o : d.agents)
        if (o.id == a.id) present = true;
      if (!present) defect = true;
    }
    if (defect) ++defective;
  }
  return truth.frames.empty()
             ? 0.0
             : static_cast<double>(defective) / truth.frames.size();
}

}  // namespace deskdrive
