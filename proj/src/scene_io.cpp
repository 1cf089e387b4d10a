#include "deskdrive/scene_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace deskdrive {

using nlohmann::json;

static json pose_to_json(const Pose2& p) { return json::array({p.x, p.y, p.yaw}); }

static Pose2 pose_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

static json points_to_json(const std::vector<Vec2>& pts) {
  json arr = json::array();
  for (const Vec2& p : pts) arr.push_back(json::array({p.x, p.y}));
  return arr;
}

static std::vector<Vec2> points_from_json(const json& j) {
  std::vector<Vec2> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

static json agent_to_json(const AgentBox& a) {
  return json{{"id", a.id},
              {"p", pose_to_json(a.pose)},
              {"l", a.length},
              {"w", a.width},
              {"v", json::array({a.velocity.x, a.velocity.y})},
              {"c", static_cast<int>(a.cls)}};
}

static AgentBox agent_from_json(const json& j) {
  AgentBox a;
  a.id = j.at("id").get<int64_t>();
  a.pose = pose_from_json(j.at("p"));
  a.length = j.at("l").get<double>();
  a.width = j.at("w").get<double>();
  a.velocity = {j.at("v").at(0).get<double>(), j.at("v").at(1).get<double>()};
  a.cls = static_cast<AgentClass>(j.at("c").get<int>());
  return a;
}

std::string log_to_jsonl(const DriveLog& log) {
  json lanes = json::array();
  for (const Lane& lane : log.map.lanes) {
    lanes.push_back(json{{"id", lane.id},
                         {"center", points_to_json(lane.centerline)},
                         {"left", points_to_json(lane.left_boundary)},
                         {"right", points_to_json(lane.right_boundary)},
                         {"succ", lane.successors}});
  }
  json crosswalks = json::array();
  for (const auto& cw : log.map.crosswalks) crosswalks.push_back(points_to_json(cw));
  json drivable = json::array();
  for (const auto& poly : log.map.drivable_area) drivable.push_back(points_to_json(poly));

  json header{{"version", 1},
              {"meta",
               json{{"scenario", log.meta.scenario},
                    {"seed", log.meta.seed},
                    {"sensor", log.meta.sensor}}},
              {"map", json{{"lanes", lanes},
                           {"crosswalks", crosswalks},
                           {"drivable", drivable}}}};

  std::string out = header.dump();
  out.push_back('\n');
  for (const SceneFrame& f : log.frames) {
    json agents = json::array();
    for (const AgentBox& a : f.agents) agents.push_back(agent_to_json(a));
    json lights = json::array();
    for (const TrafficLightState& tl : f.lights)
      lights.push_back(json::array({tl.lane_id, static_cast<int>(tl.state)}));
    json line{{"t", f.t},
              {"ego", agent_to_json(f.ego)},
              {"ego_obs", pose_to_json(f.ego_obs)},
              {"agents", agents},
              {"lights", lights}};
    out += line.dump();
    out.push_back('\n');
  }
  return out;
}

DriveLog log_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("log parse: empty input");
  json header = json::parse(line);
  DriveLog log;
  log.meta.scenario = header.at("meta").at("scenario").get<std::string>();
  log.meta.seed = header.at("meta").at("seed").get<uint64_t>();
  log.meta.sensor = header.at("meta").at("sensor").get<std::string>();
  for (const auto& jl : header.at("map").at("lanes")) {
    Lane lane;
    lane.id = jl.at("id").get<int64_t>();
    lane.centerline = points_from_json(jl.at("center"));
    lane.left_boundary = points_from_json(jl.at("left"));
    lane.right_boundary = points_from_json(jl.at("right"));
    lane.successors = jl.at("succ").get<std::vector<int64_t>>();
    log.map.lanes.push_back(std::move(lane));
  }
  for (const auto& jc : header.at("map").at("crosswalks"))
    log.map.crosswalks.push_back(points_from_json(jc));
  for (const auto& jd : header.at("map").at("drivable"))
    log.map.drivable_area.push_back(points_from_json(jd));

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json jf = json::parse(line);
    SceneFrame f;
    f.t = jf.at("t").get<double>();
    f.ego = agent_from_json(jf.at("ego"));
    f.ego_obs = pose_from_json(jf.at("ego_obs"));
    for (const auto& ja : jf.at("agents")) f.agents.push_back(agent_from_json(ja));
    for (const auto& jt : jf.at("lights"))
      f.lights.push_back({jt.at(0).get<int64_t>(),
                          static_cast<LightState>(jt.at(1).get<int>())});
    log.frames.push_back(std::move(f));
  }
  return log;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_log(const DriveLog& log, const std::string& path) {
  write_file_atomic(path, log_to_jsonl(log));
}

DriveLog load_log(const std::string& path) { return log_from_jsonl(read_file(path)); }

}  // namespace deskdrive
