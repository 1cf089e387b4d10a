#pragma once

#include <span>
#include <string>
#include <vector>

#include "deskdrive/metrics.hpp"
#include "deskdrive/sim.hpp"

namespace deskdrive {

// One aggregated sweep cell: an arm at a data fraction, before or after
// fine-tuning, averaged across seeds.
struct ResultRow {
  std::string arm;
  double fraction = 1.0;
  double hours = 0.0;
  bool finetuned = false;
  int n_seeds = 0;
  EvalStats mean;
  EvalStats stddev;
};

std::string results_to_csv(std::span<const ResultRow> rows);
// Throws with the offending line number on malformed input.
std::vector<ResultRow> results_from_csv(const std::string& csv);

// Aligned text table: Front / Side / Rear / Off-road / L2 / I1k columns,
// "mean +- (std)" cells.
std::string render_table(std::span<const ResultRow> rows);

// Intervention rate vs training hours, one polyline per curve with error
// bars. Deterministic output (fixed canvas, fixed number formatting).
struct CurveSpec {
  std::string label;
  std::string color;
  std::vector<ResultRow> points;  // sorted by hours
};
std::string render_curves_svg(std::span<const CurveSpec> curves);

// Builds the standard per-arm curves (fine-tuned rows) from sweep rows.
std::vector<CurveSpec> sweep_curves(std::span<const ResultRow> rows);
// Fine-tuned vs raw curves for one arm.
std::vector<CurveSpec> ablation_curves(std::span<const ResultRow> rows,
                                       const std::string& arm);

// Per-segment storyboard: drivable area, lane centerlines, crosswalks,
// logged agents at sampled times, logged and simulated ego paths.
std::string render_trace_svg(const SimTrace& trace, const Segment& segment);

}  // namespace deskdrive
