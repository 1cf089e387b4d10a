#include "deskdrive/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "deskdrive/rng.hpp"
#include "json.hpp"

namespace deskdrive {

std::vector<Segment> segment_log(const DriveLog& log, int id_base) {
  const int n = static_cast<int>(log.frames.size());
  const int seg_steps = static_cast<int>(kSegmentSeconds * kFps);
  const int min_steps = static_cast<int>(kMinSegmentSeconds * kFps);
  const int warmup = static_cast<int>(kWarmupSeconds * kFps);
  std::vector<Segment> out;
  if (n < 2) return out;
  for (int start = 0; start + 1 < n; start += seg_steps) {
    int end = std::min(start + seg_steps, n - 1);
    if (end - start < min_steps && start > 0) break;  // drop short remainder
    Segment s;
    s.log = &log;
    s.id = id_base + static_cast<int>(out.size());
    s.start = start;
    s.end = end;
    s.history_start = std::max(0, start - warmup);
    out.push_back(s);
    if (end == n - 1) break;
  }
  return out;
}

EgoState ego_step(const EgoState& state, const Trajectory& pred) {
  const Vec2& w = pred.points[0];
  if (!std::isfinite(w.x) || !std::isfinite(w.y))
    throw std::runtime_error("ego_step: non-finite prediction");

  Vec2 disp = rotate_from_ego(state.pose, w);
  double ds_raw = disp.norm();
  double v_next = std::clamp(ds_raw / kDt, std::max(0.0, state.speed - kMaxAccel * kDt),
                             state.speed + kMaxAccel * kDt);
  double heading = ds_raw > 0.05 ? std::atan2(disp.y, disp.x) : state.pose.yaw;
  double ds = v_next * kDt;
  double dyaw = normalize_angle(heading - state.pose.yaw);
  double dyaw_max = max_curvature() * ds;
  dyaw = std::clamp(dyaw, -dyaw_max, dyaw_max);

  EgoState next;
  next.pose = make_pose(state.pose.x, state.pose.y, state.pose.yaw + dyaw);
  next.pose.x += ds * std::cos(next.pose.yaw);
  next.pose.y += ds * std::sin(next.pose.yaw);
  next.speed = v_next;
  return next;
}

const char* to_string(Termination term) {
  switch (term) {
    case Termination::completed: return "completed";
    case Termination::collision_front: return "collision_front";
    case Termination::collision_side: return "collision_side";
    case Termination::collision_rear: return "collision_rear";
    case Termination::off_road: return "off_road";
    case Termination::aborted: return "aborted";
  }
  return "unknown";
}

Policy planner_policy(const PlannerParams& params) {
  return [params](const FeatureSet& fs, const PolicyContext&) {
    return planner_forward(params, fs);
  };
}

Policy logged_future_policy() {
  return [](const FeatureSet&, const PolicyContext& ctx) {
    const auto& frames = ctx.segment->log->frames;
    Trajectory traj;
    for (int j = 1; j <= kHorizonSteps; ++j) {
      int idx = std::min(ctx.frame_index + j,
                         static_cast<int>(frames.size()) - 1);
      Vec2 p = frames[static_cast<size_t>(idx)].ego.pose.position();
      traj.points[static_cast<size_t>(j - 1)] = to_ego_frame(ctx.ego.pose, p);
    }
    return traj;
  };
}

SimTrace unroll(const Policy& policy, const Segment& segment,
                const SensorConfig& eval_sensor, uint64_t seed) {
  if (!segment.log || segment.end <= segment.start)
    throw std::invalid_argument("unroll: bad segment");
  const DriveLog& log = *segment.log;

  SimTrace trace;
  trace.segment_id = segment.id;

  // one localization drift walk across warm-up plus rollout
  Rng walk(substream(seed, stream_tag::kDrift));
  double step_sigma = eval_sensor.loc_drift_sigma * std::sqrt(kDt);
  Vec2 drift{0.0, 0.0};

  std::vector<SceneFrame> window;
  window.reserve(kHistorySteps + 1);
  auto push_window = [&window](SceneFrame&& f) {
    if (window.size() == kHistorySteps + 1)
      window.erase(window.begin());
    window.push_back(std::move(f));
  };

  // warm-up history from the log, observed through the same sensor
  for (int k = segment.history_start; k < segment.start; ++k) {
    drift.x += step_sigma * walk.normal();
    drift.y += step_sigma * walk.normal();
    push_window(degrade_frame(log.frames[static_cast<size_t>(k)], eval_sensor,
                              substream(seed, stream_tag::kFrame,
                                        static_cast<uint64_t>(k)),
                              drift));
  }

  EgoState ego;
  ego.pose = log.frames[static_cast<size_t>(segment.start)].ego.pose;
  ego.speed = log.frames[static_cast<size_t>(segment.start)].ego.speed();

  double l2_sum = 0.0;
  int l2_count = 0;

  for (int k = segment.start; k <= segment.end; ++k) {
    const SceneFrame& logged = log.frames[static_cast<size_t>(k)];

    // true scene around the simulated ego; agents replay the log untouched
    SceneFrame truth;
    truth.t = logged.t;
    truth.ego.id = 0;
    truth.ego.pose = ego.pose;
    truth.ego.length = logged.ego.length;
    truth.ego.width = logged.ego.width;
    truth.ego.velocity = Vec2{std::cos(ego.pose.yaw), std::sin(ego.pose.yaw)} * ego.speed;
    truth.ego.cls = AgentClass::vehicle;
    truth.ego_obs = ego.pose;
    truth.agents = logged.agents;
    truth.lights = logged.lights;

    // safety checks on true geometry
    std::optional<Termination> term;
    for (const AgentBox& a : logged.agents) {
      if (obb_intersect(truth.ego, a)) {
        switch (classify_collision(truth.ego, a)) {
          case EventKind::front_collision: term = Termination::collision_front; break;
          case EventKind::rear_collision: term = Termination::collision_rear; break;
          default: term = Termination::collision_side; break;
        }
        trace.other_agent = a.id;
        break;
      }
    }
    if (!term && off_road(truth.ego, log.map)) term = Termination::off_road;

    l2_sum += (ego.pose.position() - logged.ego.pose.position()).norm();
    ++l2_count;

    if (term) {
      trace.steps.push_back({ego.pose, ego.speed, Trajectory{}});
      trace.term = *term;
      trace.t_event = logged.t;
      break;
    }
    if (k == segment.end) {
      trace.steps.push_back({ego.pose, ego.speed, Trajectory{}});
      trace.term = Termination::completed;
      break;
    }

    drift.x += step_sigma * walk.normal();
    drift.y += step_sigma * walk.normal();
    push_window(degrade_frame(truth, eval_sensor,
                              substream(seed, stream_tag::kFrame,
                                        static_cast<uint64_t>(k)),
                              drift));

    Trajectory pred;
    try {
      FeatureSet fs = vectorize(window, log.map);
      PolicyContext ctx{k, ego, &segment};
      pred = policy(fs, ctx);
      trace.steps.push_back({ego.pose, ego.speed, pred});
      EgoState next = ego_step(ego, pred);
      trace.path_length += (next.pose.position() - ego.pose.position()).norm();
      ego = next;
    } catch (const std::exception&) {
      trace.steps.push_back({ego.pose, ego.speed, pred});
      trace.term = Termination::aborted;
      trace.t_event = logged.t;
      break;
    }
  }

  trace.l2 = l2_count > 0 ? l2_sum / l2_count : 0.0;
  return trace;
}

std::string trace_to_jsonl(const SimTrace& trace) {
  nlohmann::json header{{"segment", trace.segment_id},
                        {"termination", to_string(trace.term)},
                        {"t_event", trace.t_event},
                        {"other_agent", trace.other_agent},
                        {"path_length", trace.path_length},
                        {"l2", trace.l2}};
  std::string out = header.dump();
  out.push_back('\n');
  for (const SimStep& s : trace.steps) {
    nlohmann::json pred = nlohmann::json::array();
    for (const Vec2& p : s.pred.points) pred.push_back(nlohmann::json::array({p.x, p.y}));
    nlohmann::json line{{"pose", nlohmann::json::array({s.pose.x, s.pose.y, s.pose.yaw})},
                        {"speed", s.speed},
                        {"pred", pred}};
    out += line.dump();
    out.push_back('\n');
  }
  return out;
}

EvalOutcome evaluate_policy(const Policy& policy,
                            std::span<const DriveLog> test_logs,
                            const SensorConfig& eval_sensor, uint64_t seed,
                            int passes, std::vector<SimTrace>* traces) {
  std::vector<Segment> segments;
  for (const DriveLog& log : test_logs) {
    auto segs = segment_log(log, static_cast<int>(segments.size()));
    segments.insert(segments.end(), segs.begin(), segs.end());
  }
  if (segments.empty()) throw std::runtime_error("evaluate: no segments");
  if (passes < 1) throw std::invalid_argument("evaluate: passes must be >= 1");

  const size_t total = segments.size() * static_cast<size_t>(passes);
  std::vector<SimTrace> all(total);
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < total; ++i) {
    size_t pass = i / segments.size();
    size_t si = i % segments.size();
    uint64_t s = substream(seed, stream_tag::kEval, pass,
                           static_cast<uint64_t>(segments[si].id));
    all[i] = unroll(policy, segments[si], eval_sensor, s);
  }

  EvalOutcome out;
  out.segments = static_cast<int>(total);
  size_t counts[4] = {0, 0, 0, 0};
  double miles = 0.0;
  double l2_weighted = 0.0;
  size_t l2_steps = 0;
  for (const SimTrace& tr : all) {
    miles += tr.path_length / kMetersPerMile;
    l2_weighted += tr.l2 * static_cast<double>(tr.steps.size());
    l2_steps += tr.steps.size();
    SafetyEvent ev;
    ev.segment_id = tr.segment_id;
    ev.t = tr.t_event;
    ev.other_agent = tr.other_agent;
    switch (tr.term) {
      case Termination::collision_front:
        ev.kind = EventKind::front_collision; counts[0]++; out.events.push_back(ev); break;
      case Termination::collision_side:
        ev.kind = EventKind::side_collision; counts[1]++; out.events.push_back(ev); break;
      case Termination::collision_rear:
        ev.kind = EventKind::rear_collision; counts[2]++; out.events.push_back(ev); break;
      case Termination::off_road:
        ev.kind = EventKind::off_road; counts[3]++; out.events.push_back(ev); break;
      case Termination::aborted:
        out.aborted++; break;
      case Termination::completed:
        break;
    }
  }
  if (out.aborted > 0)
    throw std::runtime_error("evaluate: " + std::to_string(out.aborted) +
                             " segment(s) aborted by planner failure");
  out.stats.miles = miles;
  out.stats.front_per_1k = i1k(counts[0], miles);
  out.stats.side_per_1k = i1k(counts[1], miles);
  out.stats.rear_per_1k = i1k(counts[2], miles);
  out.stats.offroad_per_1k = i1k(counts[3], miles);
  out.stats.i1k = i1k(counts[0] + counts[1] + counts[2] + counts[3], miles);
  out.stats.l2_m = l2_steps > 0 ? l2_weighted / static_cast<double>(l2_steps) : 0.0;
  if (traces) *traces = std::move(all);
  return out;
}

EvalOutcome evaluate_params(const PlannerParams& params,
                            std::span<const DriveLog> test_logs,
                            const SensorConfig& eval_sensor, uint64_t seed,
                            int passes) {
  return evaluate_policy(planner_policy(params), test_logs, eval_sensor, seed,
                         passes);
}

}  // namespace deskdrive
