#include "deskdrive/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace deskdrive {

namespace {

constexpr double kLaneChunkMeters = 60.0;

struct Candidate {
  double dist2;
  int64_t id;
  int sub;  // chunk index / crosswalk index tiebreak
  bool operator<(const Candidate& o) const {
    return std::tie(dist2, id, sub) < std::tie(o.dist2, o.id, o.sub);
  }
  std::array<Vec2, FeatureSet::kLanePoints> pts;
};

}  // namespace

FeatureSet vectorize(std::span<const SceneFrame> frames, const MapLayer& map) {
  if (frames.empty()) throw std::invalid_argument("vectorize: no frames");
  if (frames.size() > static_cast<size_t>(FeatureSet::kHistoryRows))
    throw std::invalid_argument("vectorize: too many frames");
  if (map.lanes.empty()) throw std::invalid_argument("vectorize: empty map");

  const SceneFrame& now = frames.back();
  const Pose2 center = now.ego_obs;

  FeatureSet fs;

  // ego history, earliest row first; left-pad by repeating the earliest frame
  int pad = FeatureSet::kHistoryRows - static_cast<int>(frames.size());
  for (int row = 0; row < FeatureSet::kHistoryRows; ++row) {
    const SceneFrame& f = frames[static_cast<size_t>(std::max(0, row - pad))];
    Vec2 rel = to_ego_frame(center, {f.ego_obs.x, f.ego_obs.y});
    double* dst = &fs.ego_history[static_cast<size_t>(row) * FeatureSet::kHistoryDim];
    dst[0] = rel.x;
    dst[1] = rel.y;
    dst[2] = normalize_angle(f.ego_obs.yaw - center.yaw);
    dst[3] = f.ego.speed();
  }

  // agents from the newest frame, nearest (then lowest id) first
  {
    struct AgentRef {
      double dist2;
      int64_t id;
      const AgentBox* box;
      bool operator<(const AgentRef& o) const {
        return std::tie(dist2, id) < std::tie(o.dist2, o.id);
      }
    };
    std::vector<AgentRef> refs;
    refs.reserve(now.agents.size());
    for (const AgentBox& a : now.agents)
      refs.push_back({(a.pose.position() - center.position()).norm2(), a.id, &a});
    std::sort(refs.begin(), refs.end());
    int n = std::min<int>(FeatureSet::kAgentSlots, static_cast<int>(refs.size()));
    for (int i = 0; i < n; ++i) {
      const AgentBox& a = *refs[static_cast<size_t>(i)].box;
      Vec2 rel = to_ego_frame(center, a.pose.position());
      Vec2 vel = rotate_to_ego(center, a.velocity);
      double yaw = normalize_angle(a.pose.yaw - center.yaw);
      double* dst = &fs.agents[static_cast<size_t>(i) * FeatureSet::kAgentDim];
      dst[0] = rel.x;
      dst[1] = rel.y;
      dst[2] = std::cos(yaw);
      dst[3] = std::sin(yaw);
      dst[4] = a.length;
      dst[5] = a.width;
      dst[6] = vel.x;
      dst[7] = vel.y;
      dst[8] = static_cast<double>(a.cls) + 1.0;  // 0 is the masked value
      fs.agent_mask[static_cast<size_t>(i)] = true;
    }
  }

  // lane centerline chunks, resampled and selected nearest first
  {
    std::vector<Candidate> cands;
    for (const Lane& lane : map.lanes) {
      double len = polyline_length(lane.centerline);
      if (len <= 0.0) continue;
      int chunks = std::max(1, static_cast<int>(std::ceil(len / kLaneChunkMeters)));
      // resample the whole lane once, finely enough to cut exact chunks
      std::vector<Vec2> fine =
          polyline_resample(lane.centerline,
                            chunks * (FeatureSet::kLanePoints - 1) + 1);
      for (int c = 0; c < chunks; ++c) {
        Candidate cand;
        cand.id = lane.id;
        cand.sub = c;
        double best = std::numeric_limits<double>::infinity();
        for (int p = 0; p < FeatureSet::kLanePoints; ++p) {
          Vec2 w = fine[static_cast<size_t>(c * (FeatureSet::kLanePoints - 1) + p)];
          cand.pts[static_cast<size_t>(p)] = w;
          best = std::min(best, (w - center.position()).norm2());
        }
        cand.dist2 = best;
        cands.push_back(cand);
      }
    }
    std::sort(cands.begin(), cands.end());
    int n = std::min<int>(FeatureSet::kLaneSlots, static_cast<int>(cands.size()));
    for (int i = 0; i < n; ++i) {
      const Candidate& cand = cands[static_cast<size_t>(i)];
      double* dst = &fs.lanes[static_cast<size_t>(i) * FeatureSet::kLaneDim];
      for (int p = 0; p < FeatureSet::kLanePoints; ++p) {
        Vec2 rel = to_ego_frame(center, cand.pts[static_cast<size_t>(p)]);
        dst[2 * p] = rel.x;
        dst[2 * p + 1] = rel.y;
      }
      LightState tl = LightState::unknown;
      for (const TrafficLightState& l : now.lights)
        if (l.lane_id == cand.id) tl = l.state;
      dst[2 * FeatureSet::kLanePoints + static_cast<int>(tl)] = 1.0;
      fs.lane_mask[static_cast<size_t>(i)] = true;
    }
  }

  // crosswalk rings
  {
    struct CwRef {
      double dist2;
      int idx;
      bool operator<(const CwRef& o) const {
        return std::tie(dist2, idx) < std::tie(o.dist2, o.idx);
      }
    };
    std::vector<CwRef> refs;
    for (size_t c = 0; c < map.crosswalks.size(); ++c) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2& v : map.crosswalks[c])
        best = std::min(best, (v - center.position()).norm2());
      refs.push_back({best, static_cast<int>(c)});
    }
    std::sort(refs.begin(), refs.end());
    int n = std::min<int>(FeatureSet::kCrosswalkSlots, static_cast<int>(refs.size()));
    for (int i = 0; i < n; ++i) {
      const auto& poly = map.crosswalks[static_cast<size_t>(refs[static_cast<size_t>(i)].idx)];
      std::vector<Vec2> ring = ring_resample(poly, FeatureSet::kLanePoints);
      double* dst = &fs.crosswalks[static_cast<size_t>(i) * FeatureSet::kCrosswalkDim];
      for (int p = 0; p < FeatureSet::kLanePoints; ++p) {
        Vec2 rel = to_ego_frame(center, ring[static_cast<size_t>(p)]);
        dst[2 * p] = rel.x;
        dst[2 * p + 1] = rel.y;
      }
      fs.crosswalk_mask[static_cast<size_t>(i)] = true;
    }
  }

  return fs;
}

std::string feature_set_to_text(const FeatureSet& fs) {
  std::string out;
  char buf[64];
  auto emit = [&](const char* name, const double* data, size_t n) {
    out += name;
    for (size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), " %.17g", data[i]);
      out += buf;
    }
    out.push_back('\n');
  };
  emit("ego_history", fs.ego_history.data(), fs.ego_history.size());
  out += "agent_mask";
  for (bool m : fs.agent_mask) out += m ? " 1" : " 0";
  out.push_back('\n');
  emit("agents", fs.agents.data(), fs.agents.size());
  out += "lane_mask";
  for (bool m : fs.lane_mask) out += m ? " 1" : " 0";
  out.push_back('\n');
  emit("lanes", fs.lanes.data(), fs.lanes.size());
  out += "crosswalk_mask";
  for (bool m : fs.crosswalk_mask) out += m ? " 1" : " 0";
  out.push_back('\n');
  emit("crosswalks", fs.crosswalks.data(), fs.crosswalks.size());
  return out;
}

}  // namespace deskdrive
