#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deskdrive/planner.hpp"
#include "deskdrive/sim.hpp"

namespace deskdrive {

struct TrainConfig {
  double base_lr = 3e-4;
  int batch_size = 64;
  int epochs_at_full_data = 38;
  double warmup_frac = 0.05;
  double perturb_prob = 0.5;
  double perturb_lat_max = 1.0;        // m
  double perturb_yaw_max_deg = 25.0;
  uint64_t seed = 1;
  ArchConfig arch;
};

struct FinetuneConfig {
  int max_epochs = 5;
  double lr_factor = 0.1;
  int eval_passes = 2;       // validation closed-loop repetitions
  uint64_t eval_seed = 9000;
};

// Keeps the total optimizer step count constant across dataset fractions:
// round(epochs_at_full_data / fraction).
int epochs_for_fraction(double fraction, int epochs_at_full_data = 38);

// Linear warmup to base_lr over warmup_frac of the run, then cosine decay
// to 0.01 * base_lr. A function of step/total_steps only.
double lr_at_step(int64_t step, int64_t total_steps, const TrainConfig& cfg);

struct TrainSample {
  int log_index = 0;
  int frame_index = 0;
};

// Every frame with at least 1.2 s of future within its snippet.
std::vector<TrainSample> enumerate_samples(std::span<const DriveLog> dataset);

struct TrainingSample {
  std::vector<SceneFrame> window;  // up to 31 frames ending at the sample
  Trajectory target;               // expressed in the (possibly perturbed)
                                   // frame of the newest window entry
  bool perturbed = false;
};

// Builds one sample. With probability perturb_prob the current pose is
// displaced laterally and in yaw, and the target becomes a bicycle-model
// recovery rolled back onto the recorded future at the logged speeds; a
// perturbation needing more than 6 consecutive over-limit curvature steps
// is discarded and the clean sample used instead.
TrainingSample make_training_sample(const DriveLog& log, int frame_index,
                                    const TrainConfig& cfg,
                                    uint64_t sample_seed);

struct TrainResult {
  PlannerParams params;
  AdamState adam;
  std::vector<double> epoch_loss;
  int64_t steps = 0;
  std::string csv_log;  // step,lr,loss lines
};

// Open-loop behavioral cloning. Deterministic for a fixed config: epoch
// shuffles, perturbations and init all derive from cfg.seed. If `resume`
// is given, continues after its completed epochs with identical results to
// an uninterrupted run. `checkpoint_path`, when set, persists the state
// after every epoch.
TrainResult train(std::span<const DriveLog> dataset, const TrainConfig& cfg,
                  int epochs, const std::string& sensor_tag,
                  const std::optional<Checkpoint>& resume = std::nullopt,
                  const std::string& checkpoint_path = "");

// Up to max_epochs at base_lr * lr_factor on the high-fidelity set; after
// every epoch the closed-loop intervention rate on the validation set is
// measured and the best checkpoint (including the starting one) is
// returned; stops as soon as the rate rises above the best seen.
PlannerParams finetune(const PlannerParams& params,
                       std::span<const DriveLog> hd_dataset,
                       const TrainConfig& base_cfg, const FinetuneConfig& ft,
                       std::span<const DriveLog> validation_logs,
                       const SensorConfig& eval_sensor);

}  // namespace deskdrive
