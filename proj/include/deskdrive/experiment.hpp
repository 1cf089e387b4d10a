#pragma once

#include <map>
#include <string>
#include <vector>

#include "deskdrive/report.hpp"
#include "deskdrive/scenario.hpp"
#include "deskdrive/train.hpp"

namespace deskdrive {

// Sweep configuration. Data splits keep a 100:10:30 train/finetune/test
// ratio (plus a small validation split for fine-tune early stopping), with
// disjoint seed ranges by construction.
struct ExperimentConfig {
  double full_hours = 0.15;      // training budget at fraction 1.0
  double finetune_hours = 0.015;
  double test_hours = 0.045;
  double val_hours = 0.015;
  std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  std::vector<std::string> arms{"hd", "vision"};
  std::vector<uint64_t> seeds{1, 2, 3};
  uint64_t data_seed = 77;
  int eval_passes = 8;           // sensor-stream repetitions per test segment
  uint64_t eval_seed = 4242;
  std::array<double, kScenarioKindCount> mix = default_scenario_mix();
  TrainConfig train;
  FinetuneConfig ft;
  std::map<std::string, SensorConfig> sensors;  // hd / vision / sim_vision

  ExperimentConfig();
};

// Flat key-value text with [section] headers; unknown keys are an error.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
// Canonical echo of every effective value.
std::string experiment_config_to_text(const ExperimentConfig& cfg);

struct DataBundle {
  std::vector<DriveLog> train_full;  // ground truth
  std::map<std::string, std::vector<DriveLog>> train_by_arm;
  std::vector<DriveLog> finetune_hd;
  std::vector<DriveLog> test_set;    // ground truth; degraded online at eval
  std::vector<DriveLog> val_set;
};

// Generates all splits (and per-arm degraded training data); optionally
// persists logs + manifests under <out_dir>/data.
DataBundle prepare_data(const ExperimentConfig& cfg, const std::string& out_dir,
                        bool write_files);

struct CellResult {
  std::string arm;
  double fraction = 1.0;
  double hours = 0.0;
  uint64_t seed = 0;
  EvalStats before_ft;
  EvalStats after_ft;
};

struct SweepResult {
  std::vector<ResultRow> rows;        // aggregated, both FT states
  std::vector<CellResult> cells;      // per seed
  std::vector<std::string> failures;  // "arm f<fraction> s<seed>: reason"
};

// Full study: per (arm, fraction, seed) train, fine-tune on the HD split,
// evaluate closed-loop on the HD-sensed test split before and after
// fine-tuning, aggregate across seeds. Writes runs.csv, results.csv,
// table.txt, curves.svg and the effective config into out_dir. Failed
// cells are recorded and skipped.
SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& out_dir);

// Paired fine-tuned vs raw comparison for the vision arm; reuses sweep
// outputs in out_dir when present, otherwise runs the sweep first. Writes
// ablation_table.txt and ablation.svg.
SweepResult run_finetune_ablation(const ExperimentConfig& cfg,
                                  const std::string& out_dir);

// Regenerates table.txt and curves.svg from an existing results.csv.
void render_report_files(const std::string& results_csv_path,
                         const std::string& table_path,
                         const std::string& svg_path);

}  // namespace deskdrive
