#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "relcast/lane_graph.hpp"

namespace relcast {

enum class AgentClass : uint8_t { vehicle = 0, pedestrian, cyclist, motorcycle };
constexpr int kAgentClassCount = 4;
const char* agent_class_name(AgentClass c);
AgentClass agent_class_from(const std::string& s);

/// One observed history step at 10 Hz.
struct AgentState {
  Pose2 pose;
  double speed = 0.0;  // m/s
  bool observed = true;
};

struct AgentTrack {
  int64_t id = 0;
  AgentClass cls = AgentClass::vehicle;
  double length = 4.5, width = 2.0;  // bounding box, meters
  /// Oldest first; back() is the current step (t = 0) and must be observed.
  std::vector<AgentState> history;
  /// Ground-truth future waypoints at the domain's future rate. May be
  /// shorter than the horizon (goal label absent) or empty.
  std::vector<Vec2> future;

  const Pose2& current_pose() const { return history.back().pose; }
};

/// Dataset/domain presets: sampling interval for the lane graph, history and
/// future horizons, and rates.
struct Domain {
  std::string name = "urban";
  double sample_interval = 3.0;  // m
  double history_sec = 5.0;
  double history_hz = 10.0;
  double future_sec = 6.0;
  double future_hz = 10.0;
  double speed_cap = 15.0;  // m/s, generator bound

  /// Steps in the encoder input sequence (history plus the current step).
  int history_len() const { return static_cast<int>(history_sec * history_hz + 0.5) + 1; }
  /// Waypoints in a full-horizon future.
  int future_len() const { return static_cast<int>(future_sec * future_hz + 0.5); }

  static Domain urban();
  static Domain highway();
  static Domain from_name(const std::string& name);
};

struct Scenario {
  int64_t id = 0;
  std::string domain = "urban";
  MapSource map;
  std::vector<AgentTrack> agents;
};

/// Applies a rigid transform to everything spatial (map, histories, futures);
/// speeds and box sizes are untouched.
Scenario transform(const Scenario& s, const Se2& t);
/// Multiplies coordinates, speeds and box sizes by `factor`; headings are
/// unchanged.
Scenario scale(const Scenario& s, double factor);

// ---- JSON-lines dataset I/O (one scenario per line, schema version 1) ----

void write_scenarios_jsonl(const std::string& path, const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_scenarios_jsonl(const std::string& path);

/// Streaming reader; holds one scenario at a time. Malformed lines raise
/// with the offending line number.
class ScenarioReader {
 public:
  explicit ScenarioReader(const std::string& path);
  std::optional<Scenario> next();
  size_t line_number() const { return line_no_; }

 private:
  std::ifstream is_;
  std::string path_;
  size_t line_no_ = 0;
};

}  // namespace relcast
