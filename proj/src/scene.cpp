#include "deskdrive/scene.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace deskdrive {

std::array<Vec2, 4> obb_corners(const AgentBox& box) {
  double hl = 0.5 * box.length;
  double hw = 0.5 * box.width;
  std::array<Vec2, 4> local = {Vec2{hl, hw}, Vec2{-hl, hw}, Vec2{-hl, -hw},
                               Vec2{hl, -hw}};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = from_ego_frame(box.pose, local[i]);
  return out;
}

static void validate_box(const AgentBox& b, const char* what) {
  if (!(b.length >= b.width && b.width > 0.0))
    throw std::runtime_error(std::string(what) + ": need length >= width > 0");
  if (!std::isfinite(b.pose.x) || !std::isfinite(b.pose.y) ||
      !std::isfinite(b.pose.yaw))
    throw std::runtime_error(std::string(what) + ": non-finite pose");
}

void validate_log(const DriveLog& log) {
  if (log.frames.empty()) throw std::runtime_error("log: no frames");
  if (log.map.lanes.empty()) throw std::runtime_error("log: empty map");
  for (const Lane& lane : log.map.lanes) {
    if (lane.centerline.size() < 2)
      throw std::runtime_error("log: lane centerline too short");
    for (size_t i = 1; i < lane.centerline.size(); ++i)
      if (lane.centerline[i] == lane.centerline[i - 1])
        throw std::runtime_error("log: repeated consecutive centerline point");
  }
  for (size_t i = 0; i < log.frames.size(); ++i) {
    const SceneFrame& f = log.frames[i];
    if (f.t < 0.0) throw std::runtime_error("log: negative timestamp");
    if (i > 0) {
      double dt = f.t - log.frames[i - 1].t;
      if (std::abs(dt - kDt) > 1e-9)
        throw std::runtime_error("log: frames not on the 0.1 s grid");
    }
    validate_box(f.ego, "ego");
    std::set<int64_t> ids;
    for (const AgentBox& a : f.agents) {
      validate_box(a, "agent");
      if (!ids.insert(a.id).second)
        throw std::runtime_error("log: duplicate agent id in frame");
    }
  }
}

}  // namespace deskdrive
