#pragma once

#include <array>
#include <span>
#include <string>

#include "deskdrive/scene.hpp"

namespace deskdrive {

// Fixed-size vectorized planner input. Everything is expressed in the frame
// of the observed ego pose at the newest frame; masked-out slots are exactly
// zero.
struct FeatureSet {
  static constexpr int kHistoryRows = kHistorySteps + 1;  // 31
  static constexpr int kHistoryDim = 4;                   // x, y, yaw, speed
  static constexpr int kAgentSlots = 24;
  static constexpr int kAgentDim = 9;  // x y cos sin len wid vx vy class
  static constexpr int kLaneSlots = 16;
  static constexpr int kLanePoints = 10;
  static constexpr int kLaneDim = kLanePoints * 2 + 3;  // points + TL one-hot
  static constexpr int kCrosswalkSlots = 4;
  static constexpr int kCrosswalkDim = kLanePoints * 2;

  std::array<double, kHistoryRows * kHistoryDim> ego_history{};
  std::array<double, kAgentSlots * kAgentDim> agents{};
  std::array<bool, kAgentSlots> agent_mask{};
  std::array<double, kLaneSlots * kLaneDim> lanes{};
  std::array<bool, kLaneSlots> lane_mask{};
  std::array<double, kCrosswalkSlots * kCrosswalkDim> crosswalks{};
  std::array<bool, kCrosswalkSlots> crosswalk_mask{};

  bool operator==(const FeatureSet&) const = default;
};

// Builds the planner input from the newest frame plus up to 30 predecessors
// (the earliest frame is repeated when fewer are available). Agents come
// from the newest frame, nearest first; lane centerlines are chunked to
// roughly 60 m pieces, resampled to 10 points and selected nearest first.
// Throws on an empty map.
FeatureSet vectorize(std::span<const SceneFrame> frames, const MapLayer& map);

// Text dump with full precision, for golden-file tests and debugging.
std::string feature_set_to_text(const FeatureSet& fs);

}  // namespace deskdrive
