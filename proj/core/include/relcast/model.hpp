#pragma once

#include <optional>
#include <string>

#include "relcast/hmp.hpp"
#include "relcast/layers.hpp"
#include "relcast/param_store.hpp"
#include "relcast/scenario.hpp"

namespace relcast {

/// Greedy goal sampler constants: hard removal radius, downweight radius and
/// downweight factor.
struct SamplerConfig {
  int k_modes = 6;
  double hard_radius = 2.0;   // gamma, meters
  double down_radius = 4.0;   // nu, meters; must exceed gamma
  double down_factor = 10.0;  // tau, divides surviving scores
  void validate() const;
};

struct ModelConfig {
  int64_t hidden = 128;
  int64_t attr_dim = 64;  // width of encoded edge attributes
  int n_freq = 16;
  int freq_sign = -1;
  int lane_layers = 4;
  int scene_layers = 2;
  int goal_layers = 2;
  int64_t conv_kernel = 3;
  double a2a_radius = 100.0;
  double conflict_radius = 2.5;
  /// Off = the global-frame ablation: no edge attributes, raw world
  /// coordinates appended to node/step features instead.
  bool use_pairpose = true;
  Dtype dtype = Dtype::f64;
  int t_future = 60;  // completion head waypoint count
  SamplerConfig sampler;
  uint64_t seed = 1;

  int64_t relgeom_width() const { return RelGeom::width(n_freq); }
  int64_t step_geo_width() const { return use_pairpose ? 2 * attr_dim : 8; }
  int64_t step_feature_width() const { return step_geo_width() + 4 + kAgentClassCount; }
  int64_t map_feature_width() const {
    return LaneGraph::kFeatureWidth + (use_pairpose ? 0 : 4);
  }
  int64_t goal_cond_width() const { return use_pairpose ? relgeom_width() : 2; }

  void validate() const;
};

/// Fixed edge-class schemas per stage.
std::vector<std::string> map_edge_class_names();    // 13 map-to-map classes
std::vector<std::string> scene_edge_class_names();  // + agent_map, map_agent, agent_agent
std::vector<std::string> goal_edge_class_names();   // + actor_map, map_actor

/// The full forecasting model: every learned stage plus the parameter store
/// that owns the weights. Construction is deterministic in cfg.seed.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  ModelConfig cfg;
  ad::ParamStore params;

  // agent history encoder
  ad::MlpParams history_pairpose;
  ad::Conv1dParams conv1, conv2;
  ad::GruParams history_gru;

  // lane-graph, scene, and goal-decoder HMP stages
  HmpStageParams lane_stage, scene_stage, goal_stage;

  // goal heads and the class-shared trajectory completion MLP
  ad::LinearParams goal_logit_head, goal_offset_head;
  ad::MlpParams completion;

  /// Constant input tensor in the model's dtype.
  ad::Var input(Tensor t) const { return ad::constant(t.to(cfg.dtype)); }

  std::string metadata_json() const;
  static Model from_checkpoint(const std::string& path);
  void save(const std::string& path, bool include_optimizer_state = false) const;
};

// ---- forecasting output ----

struct ForecastMode {
  Vec2 goal;
  double prob = 0.0;
  std::vector<Vec2> waypoints;  // world frame
};

struct AgentForecast {
  int64_t agent_id = 0;
  std::vector<ForecastMode> modes;
};

using ForecastSet = std::vector<AgentForecast>;

struct ForecastOptions {
  /// Offline lane-graph embeddings; when set the lane encoder is skipped.
  std::optional<Tensor> cached_map_embeddings;
};

/// End-to-end: lane graph -> encoders -> goal decoding -> greedy sampling ->
/// trajectory completion. Deterministic given the model parameters.
ForecastSet forecast(const Model& m, const Scenario& s, const ForecastOptions& opt = {});
ForecastSet forecast(const Model& m, const Scenario& s, const LaneGraph& g,
                     const ForecastOptions& opt = {});

void write_forecasts_jsonl(std::ostream& os, int64_t scenario_id, const ForecastSet& fs);
ForecastSet read_forecasts_jsonl_line(const std::string& line, int64_t* scenario_id);

}  // namespace relcast
