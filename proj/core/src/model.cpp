#include "relcast/model.hpp"

#include <stdexcept>

#include <json.hpp>

#include "relcast/checkpoint.hpp"
#include "relcast/config.hpp"
#include "relcast/decoder.hpp"
#include "relcast/encoders.hpp"

namespace relcast {

std::vector<std::string> map_edge_class_names() {
  std::vector<std::string> names;
  for (int d = 1; d <= kMaxDilation; ++d) names.push_back("succ_d" + std::to_string(d));
  for (int d = 1; d <= kMaxDilation; ++d) names.push_back("pred_d" + std::to_string(d));
  names.push_back("left");
  names.push_back("right");
  names.push_back("conflict");
  return names;
}

std::vector<std::string> scene_edge_class_names() {
  auto names = map_edge_class_names();
  names.push_back("agent_map");
  names.push_back("map_agent");
  names.push_back("agent_agent");
  return names;
}

std::vector<std::string> goal_edge_class_names() {
  auto names = map_edge_class_names();
  names.push_back("actor_map");
  names.push_back("map_actor");
  return names;
}

Model::Model(const ModelConfig& config) : cfg(config), params(config.dtype) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int64_t h = cfg.hidden;
  const int64_t d = cfg.attr_dim;

  if (cfg.use_pairpose) {
    const int64_t gw = cfg.relgeom_width();
    history_pairpose.layers.push_back(
        {params.create("history.pairpose.l0.w", {gw, d}, ad::Init::uniform_fan_in, rng),
         params.create("history.pairpose.l0.b", {d}, ad::Init::zeros, rng)});
    history_pairpose.layers.push_back(
        {params.create("history.pairpose.l1.w", {d, d}, ad::Init::uniform_fan_in, rng),
         params.create("history.pairpose.l1.b", {d}, ad::Init::zeros, rng)});
  }

  const int64_t step_w = cfg.step_feature_width();
  conv1.kernel = cfg.conv_kernel;
  conv1.w = params.create("history.conv1.w", {cfg.conv_kernel * step_w, h},
                          ad::Init::uniform_fan_in, rng);
  conv1.b = params.create("history.conv1.b", {h}, ad::Init::zeros, rng);
  conv1.skip_proj = ad::LinearParams{
      params.create("history.conv1.skip.w", {step_w, h}, ad::Init::uniform_fan_in, rng),
      params.create("history.conv1.skip.b", {h}, ad::Init::zeros, rng)};
  conv2.kernel = cfg.conv_kernel;
  conv2.w =
      params.create("history.conv2.w", {cfg.conv_kernel * h, h}, ad::Init::uniform_fan_in, rng);
  conv2.b = params.create("history.conv2.b", {h}, ad::Init::zeros, rng);

  auto gru = [&](const std::string& prefix) {
    ad::GruParams g;
    g.wz = params.create(prefix + ".wz", {h, h}, ad::Init::uniform_fan_in, rng);
    g.uz = params.create(prefix + ".uz", {h, h}, ad::Init::uniform_fan_in, rng);
    g.bz = params.create(prefix + ".bz", {h}, ad::Init::zeros, rng);
    g.wr = params.create(prefix + ".wr", {h, h}, ad::Init::uniform_fan_in, rng);
    g.ur = params.create(prefix + ".ur", {h, h}, ad::Init::uniform_fan_in, rng);
    g.br = params.create(prefix + ".br", {h}, ad::Init::zeros, rng);
    g.wn = params.create(prefix + ".wn", {h, h}, ad::Init::uniform_fan_in, rng);
    g.un = params.create(prefix + ".un", {h, h}, ad::Init::uniform_fan_in, rng);
    g.bn = params.create(prefix + ".bn", {h}, ad::Init::zeros, rng);
    return g;
  };
  history_gru = gru("history.gru");

  // stage schemas: endpoints are (src_class, dst_class) indices
  const auto map_names = map_edge_class_names();
  std::vector<std::pair<int32_t, int32_t>> lane_eps(map_names.size(), {0, 0});
  lane_stage = make_hmp_stage(params, rng, "lane", {cfg.map_feature_width()}, lane_eps,
                              map_names, d, h, cfg.lane_layers, cfg.n_freq, cfg.use_pairpose);

  const auto scene_names = scene_edge_class_names();
  std::vector<std::pair<int32_t, int32_t>> scene_eps(map_names.size(), {1, 1});
  scene_eps.push_back({0, 1});  // agent_map
  scene_eps.push_back({1, 0});  // map_agent
  scene_eps.push_back({0, 0});  // agent_agent
  scene_stage = make_hmp_stage(params, rng, "scene", {h, h}, scene_eps, scene_names, d, h,
                               cfg.scene_layers, cfg.n_freq, cfg.use_pairpose);

  const auto goal_names = goal_edge_class_names();
  std::vector<std::pair<int32_t, int32_t>> goal_eps(map_names.size(), {1, 1});
  goal_eps.push_back({0, 1});  // actor_map
  goal_eps.push_back({1, 0});  // map_actor
  goal_stage = make_hmp_stage(params, rng, "goal", {h, h}, goal_eps, goal_names, d, h,
                              cfg.goal_layers, cfg.n_freq, cfg.use_pairpose);

  goal_logit_head = {params.create("goal.logit.w", {h, 1}, ad::Init::uniform_fan_in, rng),
                     params.create("goal.logit.b", {1}, ad::Init::zeros, rng)};
  goal_offset_head = {params.create("goal.offset.w", {h, 2}, ad::Init::uniform_fan_in, rng),
                      params.create("goal.offset.b", {2}, ad::Init::zeros, rng)};

  const int64_t out_w = 2 * cfg.t_future;
  const int64_t comp_in = h + cfg.goal_cond_width();
  completion.layers.push_back(
      {params.create("completion.l0.w", {comp_in, out_w}, ad::Init::uniform_fan_in, rng),
       params.create("completion.l0.b", {out_w}, ad::Init::zeros, rng)});
  completion.layers.push_back(
      {params.create("completion.l1.w", {out_w, out_w}, ad::Init::uniform_fan_in, rng),
       params.create("completion.l1.b", {out_w}, ad::Init::zeros, rng)});
}

std::string Model::metadata_json() const { return model_config_to_json(cfg); }

Model Model::from_checkpoint(const std::string& path) {
  CheckpointData data = load_checkpoint(path);
  Model m(model_config_from_json(data.metadata_json));
  restore(m.params, data);
  return m;
}

void Model::save(const std::string& path, bool include_optimizer_state) const {
  save_checkpoint(path, params, metadata_json(), include_optimizer_state);
}

ForecastSet forecast(const Model& m, const Scenario& s, const ForecastOptions& opt) {
  const Domain domain = Domain::from_name(s.domain);
  LaneGraph g = build_lane_graph(s.map, domain.sample_interval);
  add_conflict_edges(g, m.cfg.conflict_radius);
  return forecast(m, s, g, opt);
}

ForecastSet forecast(const Model& m, const Scenario& s, const LaneGraph& g,
                     const ForecastOptions& opt) {
  ad::NoGradGuard inference;
  if (s.agents.empty()) return {};

  ad::Var map_emb;
  if (opt.cached_map_embeddings) {
    if (opt.cached_map_embeddings->rows() != g.node_count())
      throw std::invalid_argument("forecast: cached embeddings do not match the lane graph");
    map_emb = m.input(*opt.cached_map_embeddings);
  } else {
    map_emb = encode_lane_graph(m, g);
  }

  ad::Var agent_emb = encode_history(m, s.agents);
  HeteroGraph scene_graph = assemble_scene_graph(m, s.agents, g, agent_emb, map_emb);
  SceneEmbedding scene = encode_scene(m, scene_graph);

  HeteroGraph goal_graph = build_goal_graph(m, s.agents, g, scene);
  GoalPrediction pred = predict_goals(m, goal_graph);

  std::vector<Vec2> positions;
  positions.reserve(g.nodes.size());
  for (const auto& n : g.nodes) positions.push_back(n.pose.c);

  ForecastSet out;
  out.reserve(s.agents.size());
  for (int64_t a = 0; a < static_cast<int64_t>(s.agents.size()); ++a) {
    const auto& track = s.agents[static_cast<size_t>(a)];
    const auto probs = pred.field.agent_probs(a);
    const auto picks = greedy_sample(probs, positions, m.cfg.sampler);

    std::vector<Vec2> goals;
    goals.reserve(picks.size());
    for (const auto& pick : picks) {
      const Pose2& node = g.nodes[static_cast<size_t>(pick.node)].pose;
      const int64_t row = a * pred.field.n_map_nodes + pick.node;
      const Vec2 offset{pred.field.offsets.value().at(row, 0),
                        pred.field.offsets.value().at(row, 1)};
      goals.push_back(node_frame_to_world(node, offset));
    }

    ad::Var rows = complete_trajectory(m, ad::slice_rows(pred.actor_features, a, 1),
                                       track.current_pose(), goals);
    auto trajs = completion_to_world(rows.value(), track.current_pose());

    AgentForecast af;
    af.agent_id = track.id;
    for (size_t k = 0; k < picks.size(); ++k)
      af.modes.push_back({goals[k], picks[k].prob, std::move(trajs[k])});
    out.push_back(std::move(af));
  }
  return out;
}

void write_forecasts_jsonl(std::ostream& os, int64_t scenario_id, const ForecastSet& fs) {
  using nlohmann::json;
  for (const auto& af : fs) {
    json j;
    j["scenario_id"] = scenario_id;
    j["agent_id"] = af.agent_id;
    json modes = json::array();
    for (const auto& mode : af.modes) {
      json wp = json::array();
      for (const auto& w : mode.waypoints) wp.push_back({w.x, w.y});
      modes.push_back(
          {{"p", mode.prob}, {"goal", {mode.goal.x, mode.goal.y}}, {"waypoints", wp}});
    }
    j["modes"] = std::move(modes);
    os << j.dump() << '\n';
  }
}

ForecastSet read_forecasts_jsonl_line(const std::string& line, int64_t* scenario_id) {
  using nlohmann::json;
  json j = json::parse(line);
  if (scenario_id) *scenario_id = j.at("scenario_id").get<int64_t>();
  AgentForecast af;
  af.agent_id = j.at("agent_id").get<int64_t>();
  for (const auto& mj : j.at("modes")) {
    ForecastMode mode;
    mode.prob = mj.at("p").get<double>();
    mode.goal = {mj.at("goal").at(0).get<double>(), mj.at("goal").at(1).get<double>()};
    for (const auto& wj : mj.at("waypoints"))
      mode.waypoints.push_back({wj.at(0).get<double>(), wj.at(1).get<double>()});
    af.modes.push_back(std::move(mode));
  }
  return {af};
}

}  // namespace relcast
