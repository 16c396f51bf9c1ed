#include "relcast/scenario.hpp"

#include <stdexcept>

#include "json_util.hpp"

namespace relcast {

using nlohmann::json;

namespace {
constexpr int kSchemaVersion = 1;
}

const char* agent_class_name(AgentClass c) {
  switch (c) {
    case AgentClass::vehicle: return "vehicle";
    case AgentClass::pedestrian: return "pedestrian";
    case AgentClass::cyclist: return "cyclist";
    default: return "motorcycle";
  }
}

AgentClass agent_class_from(const std::string& s) {
  if (s == "vehicle") return AgentClass::vehicle;
  if (s == "pedestrian") return AgentClass::pedestrian;
  if (s == "cyclist") return AgentClass::cyclist;
  if (s == "motorcycle") return AgentClass::motorcycle;
  throw std::invalid_argument("unknown agent class: " + s);
}

Domain Domain::urban() { return Domain{}; }

Domain Domain::highway() {
  Domain d;
  d.name = "highway";
  d.sample_interval = 10.0;
  d.history_sec = 0.5;
  d.future_hz = 2.0;
  d.speed_cap = 33.0;
  return d;
}

Domain Domain::from_name(const std::string& name) {
  if (name == "urban") return urban();
  if (name == "highway") return highway();
  throw std::invalid_argument("unknown domain: " + name);
}

Scenario transform(const Scenario& s, const Se2& t) {
  Scenario out = s;
  for (auto& lane : out.map.lanes)
    for (auto& p : lane.centerline) p = t.apply(p);
  for (auto& cw : out.map.crosswalks)
    for (auto& p : cw.polygon) p = t.apply(p);
  for (auto& agent : out.agents) {
    for (auto& st : agent.history) st.pose = t.apply(st.pose);
    for (auto& w : agent.future) w = t.apply(w);
  }
  return out;
}

Scenario scale(const Scenario& s, double factor) {
  if (factor <= 0.0) throw std::invalid_argument("scale: factor must be positive");
  Scenario out = s;
  for (auto& lane : out.map.lanes) {
    for (auto& p : lane.centerline) p = p * factor;
    lane.width *= factor;
    lane.speed_limit *= factor;
  }
  for (auto& cw : out.map.crosswalks)
    for (auto& p : cw.polygon) p = p * factor;
  for (auto& agent : out.agents) {
    agent.length *= factor;
    agent.width *= factor;
    for (auto& st : agent.history) {
      st.pose.c = st.pose.c * factor;  // headings unchanged
      st.speed *= factor;
    }
    for (auto& w : agent.future) w = w * factor;
  }
  return out;
}

namespace {

json agent_to_json(const AgentTrack& a) {
  json j;
  j["id"] = a.id;
  j["class"] = agent_class_name(a.cls);
  j["length"] = a.length;
  j["width"] = a.width;
  json hist = json::array();
  for (const auto& st : a.history)
    hist.push_back({st.pose.c.x, st.pose.c.y, st.pose.h.x, st.pose.h.y, st.speed,
                    st.observed ? 1 : 0});
  j["history"] = std::move(hist);
  j["future"] = detail::polyline_json(a.future);
  return j;
}

AgentTrack agent_from_json(const json& j) {
  AgentTrack a;
  a.id = j.at("id").get<int64_t>();
  a.cls = agent_class_from(j.at("class").get<std::string>());
  a.length = j.at("length").get<double>();
  a.width = j.at("width").get<double>();
  for (const auto& row : j.at("history")) {
    AgentState st;
    st.pose.c = {row.at(0).get<double>(), row.at(1).get<double>()};
    st.pose.h = {row.at(2).get<double>(), row.at(3).get<double>()};
    st.speed = row.at(4).get<double>();
    st.observed = row.at(5).get<int>() != 0;
    a.history.push_back(st);
  }
  a.future = detail::polyline_from_json(j.at("future"));
  return a;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["v"] = kSchemaVersion;
  j["id"] = s.id;
  j["domain"] = s.domain;
  json lanes = json::array(), crosswalks = json::array();
  for (const auto& lane : s.map.lanes) lanes.push_back(detail::lane_to_json(lane));
  for (const auto& cw : s.map.crosswalks) crosswalks.push_back(detail::crosswalk_to_json(cw));
  j["map"] = {{"lanes", std::move(lanes)}, {"crosswalks", std::move(crosswalks)}};
  json agents = json::array();
  for (const auto& a : s.agents) agents.push_back(agent_to_json(a));
  j["agents"] = std::move(agents);
  return j;
}

Scenario scenario_from_json(const json& j) {
  const int v = j.at("v").get<int>();
  if (v != kSchemaVersion)
    throw std::runtime_error("scenario schema version mismatch: got " + std::to_string(v) +
                             ", expected " + std::to_string(kSchemaVersion));
  Scenario s;
  s.id = j.at("id").get<int64_t>();
  s.domain = j.at("domain").get<std::string>();
  for (const auto& lj : j.at("map").at("lanes")) s.map.lanes.push_back(detail::lane_from_json(lj));
  for (const auto& cj : j.at("map").at("crosswalks"))
    s.map.crosswalks.push_back(detail::crosswalk_from_json(cj));
  for (const auto& aj : j.at("agents")) s.agents.push_back(agent_from_json(aj));
  return s;
}

}  // namespace

void write_scenarios_jsonl(const std::string& path, const std::vector<Scenario>& scenarios) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open dataset for writing: " + path);
  for (const auto& s : scenarios) os << scenario_to_json(s).dump() << '\n';
  if (!os) throw std::runtime_error("dataset write failed: " + path);
}

std::vector<Scenario> read_scenarios_jsonl(const std::string& path) {
  ScenarioReader reader(path);
  std::vector<Scenario> out;
  while (auto s = reader.next()) out.push_back(std::move(*s));
  return out;
}

ScenarioReader::ScenarioReader(const std::string& path) : is_(path), path_(path) {
  if (!is_) throw std::runtime_error("cannot open dataset: " + path);
}

std::optional<Scenario> ScenarioReader::next() {
  std::string line;
  while (std::getline(is_, line)) {
    ++line_no_;
    if (line.empty()) continue;
    try {
      return scenario_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw std::runtime_error(path_ + ": parse error at line " + std::to_string(line_no_) +
                               ": " + e.what());
    }
  }
  return std::nullopt;
}

}  // namespace relcast
