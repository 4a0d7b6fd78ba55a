#include "crowdnav/episode_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace crowdnav {
namespace {

using nlohmann::json;

json vec_json(const Vec2& v) { return json::array({v.x, v.y}); }

Vec2 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json frame_json(const StepFrame& f, const EpisodeRecord* meta) {
  json j;
  j["t"] = f.t;
  if (meta) {
    j["meta"] = {{"seed", meta->seed},
                 {"dt", meta->dt},
                 {"sensor_range", meta->sensor_range},
                 {"arena_half_width", meta->arena_half_width}};
  }
  j["robot"] = {{"px", f.robot.position.x}, {"py", f.robot.position.y},
                {"vx", f.robot.velocity.x}, {"vy", f.robot.velocity.y},
                {"gx", f.robot.goal.x},     {"gy", f.robot.goal.y},
                {"r", f.robot.radius},      {"vmax", f.robot.v_max},
                {"theta", f.robot.heading}};
  json humans = json::array();
  for (const auto& h : f.humans) {
    json pred = json::array();
    for (const auto& p : h.predicted) pred.push_back(vec_json(p));
    humans.push_back({{"id", h.id},
                      {"px", h.position.x},
                      {"py", h.position.y},
                      {"vx", h.velocity.x},
                      {"vy", h.velocity.y},
                      {"r", h.radius},
                      {"visible", h.visible},
                      {"pred", pred}});
  }
  j["humans"] = humans;
  j["action"] = f.action ? vec_json(*f.action) : json(nullptr);
  j["reward"] = f.reward;
  json futures = json::array();
  for (const auto& track : f.gt_futures) {
    json row = json::array();
    for (const auto& p : track) row.push_back(vec_json(p));
    futures.push_back(row);
  }
  j["gt_futures"] = futures;
  j["done"] = f.done;
  j["outcome"] = f.outcome ? json(std::string(to_string(*f.outcome))) : json(nullptr);
  return j;
}

StepFrame json_frame(const json& j) {
  StepFrame f;
  f.t = j.at("t").get<int>();
  const auto& r = j.at("robot");
  f.robot.position = {r.at("px").get<double>(), r.at("py").get<double>()};
  f.robot.velocity = {r.at("vx").get<double>(), r.at("vy").get<double>()};
  f.robot.goal = {r.value("gx", 0.0), r.value("gy", 0.0)};
  f.robot.radius = r.value("r", 0.3);
  f.robot.v_max = r.value("vmax", 1.0);
  f.robot.heading = r.value("theta", 0.0);
  for (const auto& h : j.at("humans")) {
    HumanFrame hf;
    hf.id = h.at("id").get<int>();
    hf.position = {h.at("px").get<double>(), h.at("py").get<double>()};
    hf.velocity = {h.value("vx", 0.0), h.value("vy", 0.0)};
    hf.radius = h.value("r", 0.3);
    hf.visible = h.at("visible").get<bool>();
    if (h.contains("pred")) {
      for (const auto& p : h.at("pred")) hf.predicted.push_back(json_vec(p));
    }
    f.humans.push_back(std::move(hf));
  }
  if (j.contains("action") && !j.at("action").is_null()) f.action = json_vec(j.at("action"));
  f.reward = j.value("reward", 0.0);
  if (j.contains("gt_futures")) {
    for (const auto& track : j.at("gt_futures")) {
      std::vector<Vec2> row;
      for (const auto& p : track) row.push_back(json_vec(p));
      f.gt_futures.push_back(std::move(row));
    }
  }
  f.done = j.value("done", false);
  if (j.contains("outcome") && !j.at("outcome").is_null()) {
    f.outcome = parse_outcome_kind(j.at("outcome").get<std::string>());
  }
  return f;
}

}  // namespace

OutcomeKind EpisodeRecord::outcome() const {
  if (!frames.empty() && frames.back().outcome) return *frames.back().outcome;
  return OutcomeKind::Timeout;
}

void write_episode_jsonl(std::ostream& out, const EpisodeRecord& record) {
  for (std::size_t i = 0; i < record.frames.size(); ++i) {
    out << frame_json(record.frames[i], i == 0 ? &record : nullptr).dump() << '\n';
  }
}

void write_episode_jsonl(const std::filesystem::path& path, const EpisodeRecord& record) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_episode_jsonl(out, record);
}

EpisodeRecord read_episode_jsonl(std::istream& in) {
  EpisodeRecord record;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
      if (j.contains("meta")) {
        const auto& m = j.at("meta");
        record.seed = m.value("seed", std::uint64_t{0});
        record.dt = m.value("dt", 0.25);
        record.sensor_range = m.value("sensor_range", 5.0);
        record.arena_half_width = m.value("arena_half_width", 6.0);
      }
      record.frames.push_back(json_frame(j));
    } catch (const json::exception& e) {
      throw std::runtime_error("malformed episode line " + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  if (record.frames.empty()) throw std::runtime_error("episode log is empty");
  return record;
}

EpisodeRecord read_episode_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_episode_jsonl(in);
}

}  // namespace crowdnav
