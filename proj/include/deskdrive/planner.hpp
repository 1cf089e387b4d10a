#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deskdrive/features.hpp"
#include "deskdrive/scene.hpp"

namespace deskdrive {

// Set encoder over the vectorized scene: one linear embedding per element
// type, self-attention blocks with residual + layer norm, and a linear head
// that reads the ego token out into 12 waypoints. Masked slots never enter
// the token list, so outputs and gradients are bitwise independent of them.
struct ArchConfig {
  int embed_dim = 64;
  int heads = 4;
  int blocks = 2;
  int ff_dim = 128;

  static constexpr int kEgoInputDim =
      FeatureSet::kHistoryRows * FeatureSet::kHistoryDim;
  static constexpr int kAgentInputDim = FeatureSet::kAgentDim;
  static constexpr int kLaneInputDim = FeatureSet::kLaneDim;
  static constexpr int kCrosswalkInputDim = FeatureSet::kCrosswalkDim;
  static constexpr int kMaxTokens = 1 + FeatureSet::kAgentSlots +
                                    FeatureSet::kLaneSlots +
                                    FeatureSet::kCrosswalkSlots;
  static constexpr int kOutputDim = kHorizonSteps * 2;

  int head_dim() const { return embed_dim / heads; }
  bool operator==(const ArchConfig&) const = default;
};

size_t param_count(const ArchConfig& arch);

struct PlannerParams {
  ArchConfig arch;
  uint64_t seed = 0;
  std::vector<double> values;  // flat, layout fixed by the architecture
};

// Deterministic init: weights uniform in +-1/sqrt(fan_in), biases zero,
// norm gains one.
PlannerParams init_planner_params(const ArchConfig& arch, uint64_t seed);

// Throws with the failing stage name if a non-finite value appears.
Trajectory planner_forward(const PlannerParams& params, const FeatureSet& fs);

// Sum over the 12 steps of the Euclidean distance between predicted and
// target points (per-step L2 norms, not squared).
double trajectory_loss(const Trajectory& pred, const Trajectory& target);

struct TrainBatch {
  std::vector<FeatureSet> inputs;
  std::vector<Trajectory> targets;
};

struct GradResult {
  std::vector<double> grad;  // d(mean loss)/d(params)
  double mean_loss = 0.0;
};

// Exact reverse-mode gradient of the mean batch loss. The batch is split
// into a fixed number of buckets accumulated in sample order and reduced in
// bucket order, so the parallel and serial paths produce bitwise identical
// results for any thread count.
GradResult planner_grad_batch(const PlannerParams& params, const TrainBatch& batch);
// Serial reference: identical arithmetic, single thread.
GradResult planner_grad_batch_serial(const PlannerParams& params,
                                     const TrainBatch& batch);

constexpr int kGradBuckets = 8;

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t step = 0;
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Standard bias-corrected update; state is resized lazily on first use.
void adam_step(PlannerParams& params, const std::vector<double>& grad,
               AdamState& state, double lr);

// Versioned checkpoint container: one JSON header line (architecture,
// seed, counts) followed by the raw little-endian parameter array and,
// optionally, the optimizer state. Loading validates the header against
// the parameter count and refuses mismatched architectures.
struct Checkpoint {
  PlannerParams params;
  AdamState adam;
  bool has_adam = false;
  int completed_epochs = 0;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace deskdrive
