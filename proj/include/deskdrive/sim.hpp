#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "deskdrive/metrics.hpp"
#include "deskdrive/planner.hpp"
#include "deskdrive/sensor.hpp"

namespace deskdrive {

constexpr double kSegmentSeconds = 30.0;
constexpr double kMinSegmentSeconds = 10.0;
constexpr double kWarmupSeconds = 3.0;

// A 30 s slice of a log, with up to 3 s of preceding frames for history
// warm-up.
struct Segment {
  const DriveLog* log = nullptr;
  int id = 0;
  int start = 0;          // first simulated frame index
  int end = 0;            // last frame index (inclusive)
  int history_start = 0;  // warm-up frames [history_start, start)
};

// Non-overlapping segments; a final partial segment is kept when it covers
// at least 10 s.
std::vector<Segment> segment_log(const DriveLog& log, int id_base = 0);

struct EgoState {
  Pose2 pose;
  double speed = 0.0;
};

// Advances the ego to the first predicted waypoint, with curvature and
// acceleration clamps. Throws on a non-finite prediction.
EgoState ego_step(const EgoState& state, const Trajectory& pred);

enum class Termination : uint8_t {
  completed = 0,
  collision_front = 1,
  collision_side = 2,
  collision_rear = 3,
  off_road = 4,
  aborted = 5,  // planner failure, segment flagged
};

const char* to_string(Termination term);

struct SimStep {
  Pose2 pose;
  double speed = 0.0;
  Trajectory pred;  // prediction made at this step (zero on the final frame)
};

struct SimTrace {
  int segment_id = 0;
  std::vector<SimStep> steps;
  Termination term = Termination::completed;
  double t_event = -1.0;
  int64_t other_agent = -1;
  double path_length = 0.0;  // meters actually driven
  double l2 = 0.0;           // mean distance to the logged ego positions
};

struct PolicyContext {
  int frame_index = 0;  // index into the segment's log
  EgoState ego;
  const Segment* segment = nullptr;
};

using Policy = std::function<Trajectory(const FeatureSet&, const PolicyContext&)>;

// Wraps a trained network; ignores the context.
Policy planner_policy(const PlannerParams& params);

// Replays the recorded human future (transformed into the current ego
// frame); ignores the features. Reproduces the log through the full
// simulation loop, which validates the loop itself.
Policy logged_future_policy();

// Log-based closed-loop rollout: at every 0.1 s step the scene is rebuilt
// from the simulated ego plus the logged (non-reactive) agents, degraded
// with the evaluation sensor, vectorized and fed to the policy. Safety
// checks run on true geometry and terminate the segment at the first event.
SimTrace unroll(const Policy& policy, const Segment& segment,
                const SensorConfig& eval_sensor, uint64_t seed);

// Writes one trace as JSON lines (header + one line per step).
std::string trace_to_jsonl(const SimTrace& trace);

struct EvalOutcome {
  EvalStats stats;
  std::vector<SafetyEvent> events;
  int segments = 0;
  int aborted = 0;
};

// Evaluates a policy over every segment of the test logs, `passes` times
// with independent sensor streams; segments run in a parallel pool and are
// reduced in deterministic order.
EvalOutcome evaluate_policy(const Policy& policy,
                            std::span<const DriveLog> test_logs,
                            const SensorConfig& eval_sensor, uint64_t seed,
                            int passes = 1, std::vector<SimTrace>* traces = nullptr);

EvalOutcome evaluate_params(const PlannerParams& params,
                            std::span<const DriveLog> test_logs,
                            const SensorConfig& eval_sensor, uint64_t seed,
                            int passes = 1);

}  // namespace deskdrive
