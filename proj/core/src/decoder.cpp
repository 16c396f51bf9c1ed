#include "relcast/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relcast {

std::vector<double> GoalField::agent_probs(int64_t a) const {
  if (a < 0 || a >= n_agents) throw std::out_of_range("agent_probs: agent index");
  std::vector<double> z(static_cast<size_t>(n_map_nodes));
  for (int64_t i = 0; i < n_map_nodes; ++i) z[static_cast<size_t>(i)] = logits.value().at(a * n_map_nodes + i);
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return z;
}

HeteroGraph build_goal_graph(const Model& m, const std::vector<AgentTrack>& agents,
                             const LaneGraph& g, const SceneEmbedding& scene) {
  const int64_t n_agents = static_cast<int64_t>(agents.size());
  if (n_agents < 1) throw std::invalid_argument("build_goal_graph: need at least one agent");
  const int64_t n_map = g.node_count();

  HeteroGraph hg;
  hg.n_freq = m.cfg.n_freq;
  hg.freq_sign = m.cfg.freq_sign;

  NodeSet actors;
  actors.name = "actor";
  for (const auto& a : agents) actors.poses.push_back(a.current_pose());
  actors.features = scene.agents;
  hg.nodes.push_back(std::move(actors));

  // one copy of every map node per agent component, component-major
  NodeSet maps;
  maps.name = "map";
  maps.poses.reserve(static_cast<size_t>(n_agents * n_map));
  std::vector<int64_t> tiled(static_cast<size_t>(n_agents * n_map));
  for (int64_t a = 0; a < n_agents; ++a)
    for (int64_t i = 0; i < n_map; ++i) {
      maps.poses.push_back(g.nodes[static_cast<size_t>(i)].pose);
      tiled[static_cast<size_t>(a * n_map + i)] = i;
    }
  maps.features = ad::gather_rows(scene.map, tiled);
  hg.nodes.push_back(std::move(maps));

  append_map_edges(hg.edges, g, /*cls=*/1, /*offset=*/0, /*copies=*/n_agents);

  EdgeSet a2m, m2a;
  a2m.name = "actor_map";
  a2m.src_class = 0;
  a2m.dst_class = 1;
  m2a.name = "map_actor";
  m2a.src_class = 1;
  m2a.dst_class = 0;
  a2m.src.reserve(static_cast<size_t>(n_agents * n_map));
  for (int64_t a = 0; a < n_agents; ++a)
    for (int64_t i = 0; i < n_map; ++i) {
      a2m.src.push_back(a);
      a2m.dst.push_back(a * n_map + i);
      m2a.src.push_back(a * n_map + i);
      m2a.dst.push_back(a);
    }
  hg.edges.push_back(std::move(a2m));
  hg.edges.push_back(std::move(m2a));

  hg.compute_rel_features();
  return hg;
}

GoalPrediction predict_goals(const Model& m, const HeteroGraph& goal_graph) {
  auto feats = hmp_stack(goal_graph,
                         {goal_graph.nodes[0].features, goal_graph.nodes[1].features},
                         m.goal_stage);
  GoalPrediction out;
  out.actor_features = feats[0];
  out.field.logits = ad::linear(feats[1], m.goal_logit_head);
  out.field.offsets = ad::linear(feats[1], m.goal_offset_head);
  out.field.n_agents = goal_graph.nodes[0].count();
  out.field.n_map_nodes =
      out.field.n_agents > 0 ? goal_graph.nodes[1].count() / out.field.n_agents : 0;
  return out;
}

std::vector<SamplerPick> greedy_sample(const std::vector<double>& probs,
                                       const std::vector<Vec2>& positions,
                                       const SamplerConfig& cfg) {
  cfg.validate();
  const size_t n = probs.size();
  if (n == 0) throw std::invalid_argument("greedy_sample: empty score vector");
  if (positions.size() != n)
    throw std::invalid_argument("greedy_sample: positions/probs length mismatch");
  for (double p : probs)
    if (p < 0.0) throw std::invalid_argument("greedy_sample: negative probability");

  std::vector<double> score = probs;
  std::vector<bool> active(n, true);
  std::vector<int64_t> picks;
  std::vector<double> masses;

  for (int k = 0; k < cfg.k_modes; ++k) {
    int64_t best = -1;
    for (size_t i = 0; i < n; ++i)
      if (active[i] && (best < 0 || score[i] > score[static_cast<size_t>(best)]))
        best = static_cast<int64_t>(i);
    if (best < 0) break;  // exhausted
    picks.push_back(best);
    masses.push_back(probs[static_cast<size_t>(best)]);
    for (size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      const double d = (positions[i] - positions[static_cast<size_t>(best)]).norm();
      if (d < cfg.hard_radius)
        active[i] = false;  // includes the pick itself (d == 0)
      else if (d < cfg.down_radius)
        score[i] /= cfg.down_factor;
    }
  }

  // small graphs can run dry: duplicate the last pick, splitting its mass
  const size_t distinct = picks.size();
  if (distinct == 0) throw std::logic_error("greedy_sample: no pick possible");
  while (picks.size() < static_cast<size_t>(cfg.k_modes)) {
    picks.push_back(picks[distinct - 1]);
    masses.push_back(0.0);
  }
  if (picks.size() > distinct) {
    const double share =
        masses[distinct - 1] / static_cast<double>(picks.size() - distinct + 1);
    for (size_t i = distinct - 1; i < picks.size(); ++i) masses[i] = share;
  }

  double total = 0.0;
  for (double v : masses) total += v;
  std::vector<SamplerPick> out;
  out.reserve(picks.size());
  for (size_t i = 0; i < picks.size(); ++i)
    out.push_back({picks[i], total > 0.0 ? masses[i] / total
                                         : 1.0 / static_cast<double>(picks.size())});
  return out;
}

Vec2 node_frame_to_world(const Pose2& node, const Vec2& local) {
  return {node.c.x + node.h.x * local.x - node.h.y * local.y,
          node.c.y + node.h.y * local.x + node.h.x * local.y};
}

Vec2 world_to_node_frame(const Pose2& node, const Vec2& world) {
  const Vec2 d = world - node.c;
  return {node.h.x * d.x + node.h.y * d.y, -node.h.y * d.x + node.h.x * d.y};
}

ad::Var complete_trajectory(const Model& m, const ad::Var& agent_embedding, const Pose2& pose0,
                            const std::vector<Vec2>& goals_world) {
  const int64_t k = static_cast<int64_t>(goals_world.size());
  if (k == 0) throw std::invalid_argument("complete_trajectory: no goals");
  for (const auto& goal : goals_world)
    if (!std::isfinite(goal.x) || !std::isfinite(goal.y))
      throw std::invalid_argument("complete_trajectory: non-finite goal");
  if (agent_embedding.value().rows() != 1)
    throw std::invalid_argument("complete_trajectory: expects a single embedding row");

  Tensor cond = Tensor::zeros({k, m.cfg.goal_cond_width()});
  for (int64_t i = 0; i < k; ++i) {
    if (m.cfg.use_pairpose) {
      const auto row = goal_rel_features(goals_world[static_cast<size_t>(i)], pose0,
                                         m.cfg.n_freq, m.cfg.freq_sign);
      for (int64_t c = 0; c < cond.cols(); ++c) cond.set(i, c, row[static_cast<size_t>(c)]);
    } else {
      cond.set(i, 0, goals_world[static_cast<size_t>(i)].x);
      cond.set(i, 1, goals_world[static_cast<size_t>(i)].y);
    }
  }
  std::vector<int64_t> tile(static_cast<size_t>(k), 0);
  ad::Var input = ad::concat_cols({ad::gather_rows(agent_embedding, tile), m.input(cond)});
  return ad::mlp(input, m.completion);
}

std::vector<std::vector<Vec2>> completion_to_world(const Tensor& rows, const Pose2& pose0) {
  std::vector<std::vector<Vec2>> out(static_cast<size_t>(rows.rows()));
  const int64_t t_future = rows.cols() / 2;
  for (int64_t r = 0; r < rows.rows(); ++r) {
    auto& traj = out[static_cast<size_t>(r)];
    traj.reserve(static_cast<size_t>(t_future));
    for (int64_t t = 0; t < t_future; ++t)
      traj.push_back(node_frame_to_world(pose0, {rows.at(r, 2 * t), rows.at(r, 2 * t + 1)}));
  }
  return out;
}

}  // namespace relcast
