#include "deskdrive/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "deskdrive/rng.hpp"

namespace deskdrive {

int epochs_for_fraction(double fraction, int epochs_at_full_data) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("epochs_for_fraction: fraction must be in (0, 1]");
  return static_cast<int>(std::llround(epochs_at_full_data / fraction));
}

double lr_at_step(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
  if (step < 0 || step >= total_steps)
    throw std::invalid_argument("lr_at_step: step out of range");
  double warm = cfg.warmup_frac * static_cast<double>(total_steps);
  double s = static_cast<double>(step);
  if (s < warm) return cfg.base_lr * (s / warm);
  double u = (s - warm) / (static_cast<double>(total_steps) - warm);
  return cfg.base_lr * (0.01 + 0.99 * 0.5 * (1.0 + std::cos(kPi * u)));
}

std::vector<TrainSample> enumerate_samples(std::span<const DriveLog> dataset) {
  std::vector<TrainSample> out;
  for (size_t li = 0; li < dataset.size(); ++li) {
    int n = static_cast<int>(dataset[li].frames.size());
    for (int i = 0; i + kHorizonSteps < n; ++i)
      out.push_back({static_cast<int>(li), i});
  }
  return out;
}

namespace {

constexpr int kRealignLookaheadSteps = 4;
constexpr int kMaxOverLimitStreak = 6;

struct RealignResult {
  std::array<Vec2, kHorizonSteps> world;
  bool feasible = true;
};

// Rolls a bicycle model from `start` back onto the reference poses at the
// logged per-step distances. The curvature command is the logged yaw-rate
// feedforward plus a pure-pursuit correction toward a few-steps-ahead
// reference point; with zero start error the correction vanishes and the
// roll reproduces the reference exactly.
RealignResult roll_recovery(const Pose2& start, std::span<const Pose2> ref) {
  RealignResult res;
  Pose2 cur = start;
  int streak = 0;
  const int last = static_cast<int>(ref.size()) - 1;
  for (int k = 0; k < kHorizonSteps; ++k) {
    Vec2 step_vec = ref[static_cast<size_t>(k + 1)].position() -
                    ref[static_cast<size_t>(k)].position();
    double ds = step_vec.norm();
    if (ds < 1e-9) {
      // reference is stopped; hold position
      res.world[static_cast<size_t>(k)] = cur.position();
      streak = 0;
      continue;
    }
    double kappa_ff =
        normalize_angle(ref[static_cast<size_t>(k + 1)].yaw -
                        ref[static_cast<size_t>(k)].yaw) / ds;
    const Vec2 goal =
        ref[static_cast<size_t>(std::min(k + kRealignLookaheadSteps, last))]
            .position();
    Vec2 rel_sim = to_ego_frame(cur, goal);
    Vec2 rel_ref = to_ego_frame(ref[static_cast<size_t>(k)], goal);
    double fb =
        2.0 * std::sin(std::atan2(rel_sim.y, rel_sim.x)) / std::max(rel_sim.norm(), 1.0) -
        2.0 * std::sin(std::atan2(rel_ref.y, rel_ref.x)) / std::max(rel_ref.norm(), 1.0);
    double kappa_raw = kappa_ff + fb;
    double limit = max_curvature();
    if (std::abs(kappa_raw) > limit) {
      if (++streak > kMaxOverLimitStreak) {
        res.feasible = false;
        return res;
      }
    } else {
      streak = 0;
    }
    cur = heading_step(cur, std::clamp(kappa_raw, -limit, limit), ds);
    res.world[static_cast<size_t>(k)] = cur.position();
  }
  return res;
}

}  // namespace

TrainingSample make_training_sample(const DriveLog& log, int frame_index,
                                    const TrainConfig& cfg,
                                    uint64_t sample_seed) {
  const int n = static_cast<int>(log.frames.size());
  if (frame_index + kHorizonSteps >= n)
    throw std::invalid_argument("make_training_sample: not enough future");

  TrainingSample out;
  int first = std::max(0, frame_index - kHistorySteps);
  out.window.assign(log.frames.begin() + first,
                    log.frames.begin() + frame_index + 1);

  // reference: true ego poses from now to up to 3 s ahead
  const int avail = std::min(kHistorySteps, n - 1 - frame_index);
  std::vector<Pose2> ref;
  ref.reserve(static_cast<size_t>(avail) + 1);
  for (int k = 0; k <= avail; ++k)
    ref.push_back(log.frames[static_cast<size_t>(frame_index + k)].ego.pose);

  Rng rng(sample_seed);
  bool apply = rng.uniform01() < cfg.perturb_prob;
  if (apply) {
    double lat = rng.uniform(-cfg.perturb_lat_max, cfg.perturb_lat_max);
    double dyaw = rng.uniform(-cfg.perturb_yaw_max_deg, cfg.perturb_yaw_max_deg) *
                  kPi / 180.0;
    const Pose2 truth = ref[0];
    Vec2 offset = rotate_from_ego(truth, {0.0, lat});
    Pose2 perturbed_truth =
        make_pose(truth.x + offset.x, truth.y + offset.y, truth.yaw + dyaw);
    RealignResult rec = roll_recovery(perturbed_truth, ref);
    if (rec.feasible) {
      // the observed pose gets the same displacement as the true pose
      const Pose2 obs = out.window.back().ego_obs;
      Vec2 obs_off = rotate_from_ego(obs, {0.0, lat});
      Pose2 perturbed_obs =
          make_pose(obs.x + obs_off.x, obs.y + obs_off.y, obs.yaw + dyaw);
      out.window.back().ego_obs = perturbed_obs;
      for (int k = 0; k < kHorizonSteps; ++k)
        out.target.points[static_cast<size_t>(k)] =
            to_ego_frame(perturbed_obs, rec.world[static_cast<size_t>(k)]);
      out.perturbed = true;
      return out;
    }
  }

  const Pose2 center = out.window.back().ego_obs;
  for (int k = 0; k < kHorizonSteps; ++k)
    out.target.points[static_cast<size_t>(k)] =
        to_ego_frame(center, ref[static_cast<size_t>(k + 1)].position());
  return out;
}

TrainResult train(std::span<const DriveLog> dataset, const TrainConfig& cfg,
                  int epochs, const std::string& sensor_tag,
                  const std::optional<Checkpoint>& resume,
                  const std::string& checkpoint_path) {
  std::vector<TrainSample> samples = enumerate_samples(dataset);
  if (samples.empty()) throw std::runtime_error("train: empty sample set");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");

  const int64_t steps_per_epoch =
      (static_cast<int64_t>(samples.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = steps_per_epoch * epochs;

  TrainResult res;
  int start_epoch = 0;
  if (resume) {
    if (resume->params.arch != cfg.arch)
      throw std::runtime_error("train: resume architecture mismatch");
    res.params = resume->params;
    res.adam = resume->adam;
    start_epoch = resume->completed_epochs;
  } else {
    res.params = init_planner_params(cfg.arch, substream(cfg.seed, stream_tag::kInit));
  }
  res.csv_log = "step,lr,loss\n";

  char line[96];
  int64_t global_step = start_epoch * steps_per_epoch;
  for (int epoch = start_epoch; epoch < epochs; ++epoch) {
    // deterministic per-epoch shuffle
    std::vector<uint32_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    Rng shuffle_rng(substream(cfg.seed, stream_tag::kShuffle,
                              static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[shuffle_rng.next_u64() % i]);

    double epoch_loss = 0.0;
    int64_t epoch_samples = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const int bsz = static_cast<int>(
          std::min(order.size() - start, static_cast<size_t>(cfg.batch_size)));
      TrainBatch batch;
      batch.inputs.resize(static_cast<size_t>(bsz));
      batch.targets.resize(static_cast<size_t>(bsz));
#pragma omp parallel for schedule(dynamic, 4)
      for (int j = 0; j < bsz; ++j) {
        const TrainSample& s = samples[order[start + static_cast<size_t>(j)]];
        uint64_t sample_seed =
            substream(cfg.seed, stream_tag::kPerturb,
                      static_cast<uint64_t>(epoch),
                      static_cast<uint64_t>(start) + static_cast<uint64_t>(j));
        const DriveLog& log = dataset[static_cast<size_t>(s.log_index)];
        TrainingSample ts =
            make_training_sample(log, s.frame_index, cfg, sample_seed);
        batch.inputs[static_cast<size_t>(j)] = vectorize(ts.window, log.map);
        batch.targets[static_cast<size_t>(j)] = ts.target;
      }
      GradResult gr = planner_grad_batch(res.params, batch);
      double lr = lr_at_step(global_step, total_steps, cfg);
      adam_step(res.params, gr.grad, res.adam, lr);
      std::snprintf(line, sizeof(line), "%lld,%.9g,%.9g\n",
                    static_cast<long long>(global_step), lr, gr.mean_loss);
      res.csv_log += line;
      epoch_loss += gr.mean_loss * bsz;
      epoch_samples += bsz;
      ++global_step;
    }
    res.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_samples));
    if (!checkpoint_path.empty()) {
      Checkpoint ck{res.params, res.adam, true, epoch + 1};
      save_checkpoint(ck, checkpoint_path);
    }
  }
  res.steps = global_step;
  (void)sensor_tag;
  return res;
}

PlannerParams finetune(const PlannerParams& params,
                       std::span<const DriveLog> hd_dataset,
                       const TrainConfig& base_cfg, const FinetuneConfig& ft,
                       std::span<const DriveLog> validation_logs,
                       const SensorConfig& eval_sensor) {
  PlannerParams best = params;
  if (ft.max_epochs < 1) return best;

  auto val_i1k = [&](const PlannerParams& p) {
    return evaluate_params(p, validation_logs, eval_sensor, ft.eval_seed,
                           ft.eval_passes)
        .stats.i1k;
  };
  double best_i1k = val_i1k(params);

  std::vector<TrainSample> samples = enumerate_samples(hd_dataset);
  if (samples.empty()) throw std::runtime_error("finetune: empty sample set");

  TrainConfig cfg = base_cfg;
  cfg.seed = substream(base_cfg.seed, stream_tag::kPerturb, 77);
  const double lr = cfg.base_lr * ft.lr_factor;

  PlannerParams current = params;
  AdamState adam;
  for (int epoch = 0; epoch < ft.max_epochs; ++epoch) {
    std::vector<uint32_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    Rng shuffle_rng(substream(cfg.seed, stream_tag::kShuffle,
                              static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const int bsz = static_cast<int>(
          std::min(order.size() - start, static_cast<size_t>(cfg.batch_size)));
      TrainBatch batch;
      batch.inputs.resize(static_cast<size_t>(bsz));
      batch.targets.resize(static_cast<size_t>(bsz));
#pragma omp parallel for schedule(dynamic, 4)
      for (int j = 0; j < bsz; ++j) {
        const TrainSample& s = samples[order[start + static_cast<size_t>(j)]];
        uint64_t sample_seed =
            substream(cfg.seed, stream_tag::kPerturb,
                      static_cast<uint64_t>(epoch),
                      static_cast<uint64_t>(start) + static_cast<uint64_t>(j));
        const DriveLog& log = hd_dataset[static_cast<size_t>(s.log_index)];
        TrainingSample ts =
            make_training_sample(log, s.frame_index, cfg, sample_seed);
        batch.inputs[static_cast<size_t>(j)] = vectorize(ts.window, log.map);
        batch.targets[static_cast<size_t>(j)] = ts.target;
      }
      GradResult gr = planner_grad_batch(current, batch);
      adam_step(current, gr.grad, adam, lr);
    }

    double cur_i1k = val_i1k(current);
    if (cur_i1k < best_i1k) {
      best_i1k = cur_i1k;
      best = current;
    } else if (cur_i1k > best_i1k) {
      break;  // validation intervention rate started rising
    }
  }
  return best;
}

}  // namespace deskdrive
