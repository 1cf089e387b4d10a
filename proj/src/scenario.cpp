#include "deskdrive/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "deskdrive/metrics.hpp"
#include "deskdrive/rng.hpp"

namespace deskdrive {

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::free_flow: return "free_flow";
    case ScenarioKind::lead_vehicle_slowdown: return "lead_vehicle_slowdown";
    case ScenarioKind::stopped_lead: return "stopped_lead";
    case ScenarioKind::jaywalker: return "jaywalker";
    case ScenarioKind::traffic_light_stop: return "traffic_light_stop";
    case ScenarioKind::curved_road: return "curved_road";
    case ScenarioKind::dense_peloton: return "dense_peloton";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  for (int k = 0; k < kScenarioKindCount; ++k)
    if (name == to_string(static_cast<ScenarioKind>(k)))
      return static_cast<ScenarioKind>(k);
  throw std::invalid_argument("unknown scenario kind: " + name);
}

double idm_accel(double gap, double v, double v_lead, const IdmParams& p) {
  if (gap <= 0.0) throw std::invalid_argument("idm_accel: gap must be > 0");
  double s_star = p.s0 + v * p.T_headway +
                  v * (v - v_lead) / (2.0 * std::sqrt(p.a_max * p.b_comf));
  double a = p.a_max *
             (1.0 - std::pow(v / p.v0, p.delta) - (s_star / gap) * (s_star / gap));
  return std::clamp(a, -kMaxAccel, p.a_max);
}

double pure_pursuit_curvature(const Pose2& pose, std::span<const Vec2> path,
                              double lookahead) {
  if (lookahead <= 0.0)
    throw std::invalid_argument("pure_pursuit: lookahead must be > 0");
  if (path.size() < 2)
    throw std::invalid_argument("pure_pursuit: degenerate path");

  Vec2 pos = pose.position();
  if (distance_to_polyline(pos, path) > 3.0 * lookahead)
    throw std::runtime_error("pure_pursuit: pose is off-path");

  // Walk forward from the closest point until the chord from the vehicle
  // reaches the lookahead distance, then bisect the crossing segment.
  double s_here = project_onto_polyline(pos, path);
  Vec2 prev = polyline_point_at(path, s_here);
  Vec2 goal = path.back();
  bool found = false;
  double s_acc = 0.0;
  for (size_t i = 1; i < path.size(); ++i) {
    double seg = (path[i] - path[i - 1]).norm();
    double s_end = s_acc + seg;
    if (s_end > s_here) {
      Vec2 b = path[i];
      if ((b - pos).norm() >= lookahead) {
        Vec2 a = prev;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 50; ++it) {
          double mid = 0.5 * (lo + hi);
          if ((a + (b - a) * mid - pos).norm() < lookahead) lo = mid;
          else hi = mid;
        }
        goal = a + (b - a) * (0.5 * (lo + hi));
        found = true;
        break;
      }
      prev = b;
    }
    s_acc = s_end;
  }

  Vec2 rel = to_ego_frame(pose, goal);
  double alpha = std::atan2(rel.y, rel.x);
  double denom = found ? lookahead : std::max(rel.norm(), 0.5);
  double kappa = 2.0 * std::sin(alpha) / denom;
  return std::clamp(kappa, -max_curvature(), max_curvature());
}

namespace {

constexpr double kLaneWidth = 3.5;
constexpr double kShoulder = 0.25;
constexpr double kSampleStep = 2.0;
constexpr double kEgoLen = 4.5;
constexpr double kEgoWid = 2.0;
constexpr double kEgoSpawnS = 15.0;

// Road reference frame: arc-length parametrised straight line or constant
// curvature arc. Lateral offsets are positive to the left.
struct RoadFrame {
  Vec2 origin;
  double theta0 = 0.0;
  double curvature = 0.0;
  double length = 0.0;

  double heading_at(double s) const { return theta0 + curvature * s; }

  Vec2 point_at(double s, double lateral) const {
    Vec2 base;
    if (std::abs(curvature) < 1e-12) {
      base = origin + Vec2{std::cos(theta0), std::sin(theta0)} * s;
    } else {
      double th = theta0 + curvature * s;
      base = origin + Vec2{(std::sin(th) - std::sin(theta0)) / curvature,
                           (std::cos(theta0) - std::cos(th)) / curvature};
    }
    double th = heading_at(s);
    return base + Vec2{-std::sin(th), std::cos(th)} * lateral;
  }

  std::vector<Vec2> sample(double lateral) const {
    std::vector<Vec2> pts;
    int n = static_cast<int>(std::ceil(length / kSampleStep));
    pts.reserve(n + 1);
    for (int i = 0; i <= n; ++i) {
      double s = std::min(length, i * kSampleStep);
      pts.push_back(point_at(s, lateral));
    }
    return pts;
  }
};

struct World {
  RoadFrame road;
  MapLayer map;
  std::vector<Vec2> lane_center[2];  // lane 0 = ego (right), lane 1 = left
  double s_cross = -1.0;             // crosswalk center arc position
  double s_stop = -1.0;              // stop line for the signal
  bool has_crosswalk = false;
  bool has_light = false;
};

double lane_offset(int lane) { return lane == 0 ? -0.5 * kLaneWidth : 0.5 * kLaneWidth; }

World gen_world(uint64_t seed, ScenarioKind kind) {
  Rng rng(substream(seed, stream_tag::kMap, static_cast<uint64_t>(kind)));
  World w;
  w.road.origin = {rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0)};
  w.road.theta0 = rng.uniform(-kPi, kPi);

  double max_len = 600.0;
  if (kind == ScenarioKind::curved_road) {
    double radius = rng.uniform(60.0, 250.0);
    double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    w.road.curvature = sign / radius;
    max_len = std::min(max_len, 0.95 * radius * 1.5 * kPi);
  }
  w.road.length = std::max(240.0, std::min(max_len, rng.uniform(480.0, 600.0)));

  w.lane_center[0] = w.road.sample(lane_offset(0));
  w.lane_center[1] = w.road.sample(lane_offset(1));

  for (int lane = 0; lane < 2; ++lane) {
    Lane rec;
    rec.id = lane;
    rec.centerline = w.lane_center[lane];
    rec.left_boundary = w.road.sample(lane_offset(lane) + 0.5 * kLaneWidth);
    rec.right_boundary = w.road.sample(lane_offset(lane) - 0.5 * kLaneWidth);
    w.map.lanes.push_back(std::move(rec));
  }

  // single drivable corridor covering both lanes plus a small shoulder
  double edge = kLaneWidth + kShoulder;
  std::vector<Vec2> right = w.road.sample(-edge);
  std::vector<Vec2> left = w.road.sample(edge);
  std::vector<Vec2> ring = right;
  ring.insert(ring.end(), left.rbegin(), left.rend());
  w.map.drivable_area.push_back(std::move(ring));

  if (kind == ScenarioKind::jaywalker || kind == ScenarioKind::traffic_light_stop) {
    w.s_cross = rng.uniform(55.0, 95.0);
    w.has_crosswalk = true;
    double half = 1.6;
    double d = kLaneWidth + 0.8;
    w.map.crosswalks.push_back({w.road.point_at(w.s_cross - half, -d),
                                w.road.point_at(w.s_cross + half, -d),
                                w.road.point_at(w.s_cross + half, d),
                                w.road.point_at(w.s_cross - half, d)});
    if (kind == ScenarioKind::traffic_light_stop) {
      w.has_light = true;
      w.s_stop = w.s_cross - 2.6;
    }
  }
  return w;
}

struct ScriptedVehicle {
  int64_t id = 0;
  int lane = 1;
  double s = 0.0;
  double v = 0.0;
  double length = 4.4;
  double width = 1.9;
  AgentClass cls = AgentClass::vehicle;
  bool scripted_profile = false;  // leader with a speed profile
  IdmParams idm;
};

struct Jaywalker {
  bool present = false;
  int64_t id = 0;
  double s = 0.0;          // fixed arc position (crosswalk)
  double lateral = 0.0;    // current lateral offset
  double walk_speed = 1.3;
  bool walking = false;
  double trigger_dist = 35.0;
};

struct BuildFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

AgentBox vehicle_box(const World& w, const ScriptedVehicle& sv) {
  AgentBox b;
  b.id = sv.id;
  double heading = w.road.heading_at(sv.s);
  Vec2 pos = w.road.point_at(sv.s, lane_offset(sv.lane));
  b.pose = make_pose(pos.x, pos.y, heading);
  b.length = sv.length;
  b.width = sv.width;
  b.velocity = Vec2{std::cos(heading), std::sin(heading)} * sv.v;
  b.cls = sv.cls;
  return b;
}

DriveLog build_log(const ScenarioSpec& spec, int attempt) {
  uint64_t seed = substream(spec.seed, stream_tag::kRetry,
                            static_cast<uint64_t>(attempt));
  World w = gen_world(spec.seed, spec.kind);
  Rng rng(substream(seed, stream_tag::kLog));

  int steps = static_cast<int>(std::lround(spec.duration * kFps));

  IdmParams ego_idm;
  ego_idm.v0 = rng.uniform(6.0, 14.0);
  ego_idm.T_headway = rng.uniform(1.2, 1.8);
  ego_idm.a_max = rng.uniform(1.2, 2.2);
  ego_idm.b_comf = rng.uniform(1.6, 2.6);

  // speed caps so every scripted interaction stays comfortably solvable
  double cap = (w.road.length - 130.0) / spec.duration;
  if (spec.kind == ScenarioKind::curved_road)
    cap = std::min(cap, std::sqrt(2.0 / std::abs(w.road.curvature)));
  if (spec.kind == ScenarioKind::dense_peloton) cap = std::min(cap, 11.0);
  ego_idm.v0 = std::max(3.0, std::min(ego_idm.v0, cap));

  std::vector<ScriptedVehicle> vehicles;
  Jaywalker ped;
  double t_green = -1.0;
  int64_t next_id = 1;

  auto add_lane1_traffic = [&](int count) {
    double s = kEgoSpawnS + rng.uniform(-10.0, 20.0);
    for (int i = 0; i < count; ++i) {
      ScriptedVehicle sv;
      sv.id = next_id++;
      sv.lane = 1;
      s += rng.uniform(18.0, 45.0);
      sv.s = s;
      if (rng.uniform01() < 0.15) {
        sv.cls = AgentClass::cyclist;
        sv.length = 1.9;
        sv.width = 0.7;
        sv.v = rng.uniform(3.0, 6.0);
      } else {
        sv.length = rng.uniform(4.1, 4.9);
        sv.width = rng.uniform(1.8, 2.0);
        sv.v = rng.uniform(5.0, 12.0);
      }
      sv.idm.v0 = std::max(3.0, sv.v);
      sv.idm.T_headway = rng.uniform(1.2, 1.8);
      vehicles.push_back(sv);
    }
  };

  // profile state for the slowdown lead / peloton leader
  double profile_t0 = 0.0, profile_decel = 0.0, profile_vtarget = 0.0;
  double profile_resume_t = 1e9, profile_v0 = 0.0;
  double osc_base = 0.0, osc_omega = 0.0, osc_phase = 0.0;

  switch (spec.kind) {
    case ScenarioKind::free_flow:
    case ScenarioKind::curved_road:
      add_lane1_traffic(std::clamp(spec.agent_count, 0, 6));
      break;
    case ScenarioKind::lead_vehicle_slowdown: {
      ScriptedVehicle lead;
      lead.id = next_id++;
      lead.lane = 0;
      lead.s = kEgoSpawnS + 0.5 * kEgoLen + rng.uniform(30.0, 55.0);
      lead.v = ego_idm.v0 * rng.uniform(0.9, 1.1);
      lead.scripted_profile = true;
      profile_v0 = lead.v;
      profile_t0 = rng.uniform(2.0, 5.0);
      profile_decel = rng.uniform(1.5, 3.0);
      profile_vtarget = rng.uniform(0.0, 3.0);
      profile_resume_t = profile_t0 + rng.uniform(4.0, 8.0);
      vehicles.push_back(lead);
      add_lane1_traffic(std::clamp(spec.agent_count, 0, 4));
      break;
    }
    case ScenarioKind::stopped_lead: {
      ScriptedVehicle lead;
      lead.id = next_id++;
      lead.lane = 0;
      lead.s = kEgoSpawnS + rng.uniform(55.0, 90.0);
      lead.v = 0.0;
      lead.scripted_profile = true;
      profile_v0 = 0.0;
      profile_t0 = 1e9;
      vehicles.push_back(lead);
      add_lane1_traffic(std::clamp(spec.agent_count, 0, 4));
      break;
    }
    case ScenarioKind::jaywalker: {
      ped.present = true;
      ped.id = next_id++;
      ped.s = w.s_cross;
      ped.lateral = -(kLaneWidth + 1.3);
      ped.walk_speed = rng.uniform(1.0, 1.8);
      ped.trigger_dist = rng.uniform(28.0, 45.0);
      ego_idm.v0 = std::max(
          3.0, std::min(ego_idm.v0,
                        0.95 * std::sqrt(2.0 * ego_idm.b_comf *
                                         (ped.trigger_dist - 12.0))));
      add_lane1_traffic(std::clamp(spec.agent_count, 0, 3));
      break;
    }
    case ScenarioKind::traffic_light_stop: {
      t_green = rng.uniform(5.0, 10.0);
      double d_stop = w.s_stop - kEgoSpawnS;
      ego_idm.v0 = std::max(
          3.0, std::min(ego_idm.v0,
                        0.95 * std::sqrt(2.0 * ego_idm.b_comf * (d_stop - 12.0))));
      add_lane1_traffic(std::clamp(spec.agent_count, 0, 3));
      break;
    }
    case ScenarioKind::dense_peloton: {
      int n = rng.uniform_int(4, 7);
      double s = kEgoSpawnS + 0.5 * kEgoLen + rng.uniform(25.0, 40.0);
      osc_base = rng.uniform(4.0, 8.0);
      osc_omega = rng.uniform(0.3, 0.7);
      osc_phase = rng.uniform(0.0, 2.0 * kPi);
      double v_init = osc_base * (0.5 + 0.5 * std::sin(osc_phase));
      for (int i = 0; i < n; ++i) {
        ScriptedVehicle sv;
        sv.id = next_id++;
        sv.lane = 0;
        sv.s = s;
        sv.v = v_init;
        sv.idm.v0 = osc_base + 2.0;
        if (i == n - 1) sv.scripted_profile = true;  // front car has the profile
        s += sv.length + rng.uniform(6.0, 12.0);
        vehicles.push_back(sv);
      }
      add_lane1_traffic(std::clamp(spec.agent_count, 0, 2));
      break;
    }
  }

  // ego initial state on the lane-0 centerline
  double ego_v = ego_idm.v0 * rng.uniform(0.85, 1.0);
  Pose2 ego_pose = make_pose(w.road.point_at(kEgoSpawnS, lane_offset(0)).x,
                             w.road.point_at(kEgoSpawnS, lane_offset(0)).y,
                             w.road.heading_at(kEgoSpawnS));

  DriveLog log;
  log.map = w.map;
  log.meta.scenario = to_string(spec.kind);
  log.meta.seed = spec.seed;
  log.meta.sensor = "ground_truth";
  log.frames.reserve(steps + 1);

  std::span<const Vec2> ego_path(w.lane_center[0]);

  for (int k = 0; k <= steps; ++k) {
    double t = static_cast<double>(k) / kFps;

    bool red = w.has_light && t < t_green;

    SceneFrame frame;
    frame.t = t;
    frame.ego.id = 0;
    frame.ego.pose = ego_pose;
    frame.ego.length = kEgoLen;
    frame.ego.width = kEgoWid;
    frame.ego.velocity = Vec2{std::cos(ego_pose.yaw), std::sin(ego_pose.yaw)} * ego_v;
    frame.ego.cls = AgentClass::vehicle;
    frame.ego_obs = ego_pose;
    for (const ScriptedVehicle& sv : vehicles) frame.agents.push_back(vehicle_box(w, sv));
    if (ped.present) {
      AgentBox pb;
      pb.id = ped.id;
      double heading = w.road.heading_at(ped.s) + kPi / 2.0;  // crossing left
      Vec2 pos = w.road.point_at(ped.s, ped.lateral);
      pb.pose = make_pose(pos.x, pos.y, heading);
      pb.length = 0.7;
      pb.width = 0.7;
      double vmag = ped.walking ? ped.walk_speed : 0.0;
      pb.velocity = Vec2{std::cos(heading), std::sin(heading)} * vmag;
      pb.cls = AgentClass::pedestrian;
      frame.agents.push_back(pb);
    }
    if (w.has_light)
      frame.lights.push_back({0, red ? LightState::red : LightState::green});
    log.frames.push_back(frame);

    // ground-truth interpenetration check (ego + all scripted agents)
    for (size_t i = 0; i < frame.agents.size(); ++i) {
      if (obb_intersect(frame.ego, frame.agents[i]))
        throw BuildFailure("ego collision in generated scene");
      for (size_t j = i + 1; j < frame.agents.size(); ++j)
        if (obb_intersect(frame.agents[i], frame.agents[j]))
          throw BuildFailure("agent collision in generated scene");
    }

    if (k == steps) break;

    // --- advance scripted traffic ---
    for (ScriptedVehicle& sv : vehicles) {
      double a = 0.0;
      if (sv.scripted_profile) {
        if (spec.kind == ScenarioKind::dense_peloton) {
          double vt = osc_base * (0.5 + 0.5 * std::sin(osc_omega * t + osc_phase));
          a = std::clamp((vt - sv.v) / kDt, -2.5, 2.0);
        } else if (spec.kind == ScenarioKind::lead_vehicle_slowdown) {
          if (t >= profile_t0 && sv.v > profile_vtarget && t < profile_resume_t)
            a = -profile_decel;
          else if (t >= profile_resume_t && sv.v < profile_v0)
            a = 1.2;
        }
        // stopped_lead keeps a = 0 at v = 0
      } else {
        // follow the predecessor in the same lane, else free road
        double best_gap = 1e9, lead_v = sv.v;
        for (const ScriptedVehicle& other : vehicles) {
          if (&other == &sv || other.lane != sv.lane || other.s <= sv.s) continue;
          double gap = (other.s - 0.5 * other.length) - (sv.s + 0.5 * sv.length);
          if (gap < best_gap) {
            best_gap = gap;
            lead_v = other.v;
          }
        }
        double end_gap = (w.road.length - 10.0) - sv.s;
        if (end_gap < best_gap) {
          best_gap = end_gap;
          lead_v = 0.0;
        }
        if (best_gap <= 0.2) throw BuildFailure("scripted traffic too dense");
        a = idm_accel(best_gap, sv.v, lead_v, sv.idm);
      }
      sv.v = std::max(0.0, sv.v + a * kDt);
      sv.s += sv.v * kDt;
    }
    if (ped.present) {
      double s_ego = project_onto_polyline(ego_pose.position(), ego_path);
      if (!ped.walking && ped.s - s_ego <= ped.trigger_dist && ped.s > s_ego)
        ped.walking = true;
      if (ped.walking && ped.lateral < kLaneWidth + 1.3)
        ped.lateral += ped.walk_speed * kDt;
    }

    // --- advance ego: IDM over the nearest blocker + pure pursuit ---
    double s_ego = project_onto_polyline(ego_pose.position(), ego_path);
    double best_gap = 1e9, lead_v = ego_v;
    for (const ScriptedVehicle& sv : vehicles) {
      if (sv.lane != 0 || sv.s <= s_ego) continue;
      double gap = (sv.s - 0.5 * sv.length) - (s_ego + 0.5 * kEgoLen);
      if (gap < best_gap) {
        best_gap = gap;
        lead_v = sv.v;
      }
    }
    if (ped.present && ped.s > s_ego && ped.lateral > -(kLaneWidth + 0.9) &&
        ped.lateral < 0.85) {
      double gap = ped.s - s_ego - 0.5 * kEgoLen - 1.0;
      if (gap < best_gap) {
        best_gap = gap;
        lead_v = 0.0;
      }
    }
    if (red && w.s_stop > s_ego) {
      double gap = w.s_stop - s_ego - 0.5 * kEgoLen;
      if (gap < best_gap) {
        best_gap = gap;
        lead_v = 0.0;
      }
    }
    double end_gap = (w.road.length - 8.0) - s_ego;
    if (end_gap < best_gap) {
      best_gap = end_gap;
      lead_v = 0.0;
    }
    if (best_gap <= 0.2) throw BuildFailure("ego gap collapsed");

    double a = idm_accel(best_gap, ego_v, lead_v, ego_idm);
    double v_next = std::max(0.0, ego_v + a * kDt);
    double lookahead = std::clamp(0.6 * ego_v + 1.0, 4.0, 12.0);
    double kappa = pure_pursuit_curvature(ego_pose, ego_path, lookahead);
    ego_pose = heading_step(ego_pose, kappa, v_next * kDt);
    ego_v = v_next;
  }

  return log;
}

}  // namespace

MapLayer gen_map(uint64_t seed, ScenarioKind kind) {
  return gen_world(seed, kind).map;
}

DriveLog gen_log(const ScenarioSpec& spec) {
  if (spec.duration < 10.0 || spec.duration > 25.0)
    throw std::invalid_argument("gen_log: duration must be within [10, 25] s");
  for (int attempt = 0; attempt < 10; ++attempt) {
    try {
      return build_log(spec, attempt);
    } catch (const BuildFailure&) {
      continue;
    }
  }
  throw std::runtime_error("gen_log: could not satisfy no-collision constraint");
}

std::array<double, kScenarioKindCount> default_scenario_mix() {
  return {0.15, 0.20, 0.15, 0.10, 0.15, 0.15, 0.10};
}

std::vector<DriveLog> gen_dataset(double total_hours,
                                  std::span<const double> mix, uint64_t seed) {
  if (mix.size() != kScenarioKindCount)
    throw std::invalid_argument("gen_dataset: mix needs one weight per kind");
  double wsum = 0.0;
  for (double m : mix) wsum += m;
  if (std::abs(wsum - 1.0) > 1e-9)
    throw std::invalid_argument("gen_dataset: mix weights must sum to 1");

  std::vector<ScenarioSpec> specs;
  Rng rng(substream(seed, stream_tag::kDataset));
  double total = 0.0;
  double budget = total_hours * 3600.0;
  for (int i = 0; total < budget; ++i) {
    ScenarioSpec s;
    s.duration = std::round(rng.uniform(10.0, 25.0) * 10.0) / 10.0;
    double u = rng.uniform01();
    double acc = 0.0;
    s.kind = static_cast<ScenarioKind>(kScenarioKindCount - 1);
    for (int k = 0; k < kScenarioKindCount; ++k) {
      acc += mix[k];
      if (u <= acc) {
        s.kind = static_cast<ScenarioKind>(k);
        break;
      }
    }
    s.agent_count = rng.uniform_int(0, 5);
    s.seed = substream(seed, stream_tag::kDataset, static_cast<uint64_t>(i) + 1);
    specs.push_back(s);
    total += s.duration;
  }

  std::vector<DriveLog> logs(specs.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < specs.size(); ++i) logs[i] = gen_log(specs[i]);
  return logs;
}

}  // namespace deskdrive
