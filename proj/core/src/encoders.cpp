#include "relcast/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace relcast {

ad::Var encode_history(const Model& m, const std::vector<AgentTrack>& tracks) {
  const int64_t n_agents = static_cast<int64_t>(tracks.size());
  if (n_agents == 0) return ad::constant(Tensor::zeros({0, m.cfg.hidden}, m.cfg.dtype));
  const int64_t len = static_cast<int64_t>(tracks[0].history.size());
  if (len < 1) throw std::invalid_argument("encode_history: empty history");
  for (const auto& t : tracks) {
    if (static_cast<int64_t>(t.history.size()) != len)
      throw std::invalid_argument("encode_history: history lengths must match across agents");
    if (!t.history.back().observed)
      throw std::invalid_argument("encode_history: current pose must be observed");
  }

  // Per-step geometry rows: PairPose of step vs current pose, or raw world
  // pose for the global-frame ablation. Unobserved steps stay zero.
  const int64_t geo_w = m.cfg.use_pairpose ? m.cfg.relgeom_width() : 4;
  Tensor geo = Tensor::zeros({n_agents * len, geo_w});
  Tensor extras = Tensor::zeros({n_agents * len, 4 + kAgentClassCount});
  Tensor observed_gate = Tensor::zeros({n_agents * len});
  std::vector<int64_t> prev_row(static_cast<size_t>(n_agents * len));
  for (int64_t a = 0; a < n_agents; ++a) {
    const auto& track = tracks[static_cast<size_t>(a)];
    const Pose2& current = track.current_pose();
    for (int64_t s = 0; s < len; ++s) {
      const int64_t r = a * len + s;
      prev_row[static_cast<size_t>(r)] = a * len + std::max<int64_t>(0, s - 1);
      const auto& st = track.history[static_cast<size_t>(s)];
      if (st.observed) {
        observed_gate.set(r, 1.0);
        if (m.cfg.use_pairpose) {
          const auto row =
              rel_geom(st.pose, current, m.cfg.n_freq, m.cfg.freq_sign).to_vector();
          for (int64_t c = 0; c < geo_w; ++c) geo.set(r, c, row[static_cast<size_t>(c)]);
        } else {
          geo.set(r, 0, st.pose.c.x);
          geo.set(r, 1, st.pose.c.y);
          geo.set(r, 2, st.pose.h.x);
          geo.set(r, 3, st.pose.h.y);
        }
        extras.set(r, 0, st.speed);
        extras.set(r, 1, track.length);
        extras.set(r, 2, track.width);
        extras.set(r, 3, 1.0);
      }
      extras.set(r, 4 + static_cast<int64_t>(track.cls), 1.0);
    }
  }

  ad::Var e = m.cfg.use_pairpose ? ad::mlp(m.input(geo), m.history_pairpose) : m.input(geo);
  // finite difference against the previous step; step 0 differences to itself
  ad::Var de = ad::sub(e, ad::gather_rows(e, prev_row));
  e = ad::mul_rows(e, observed_gate);
  de = ad::mul_rows(de, observed_gate);
  ad::Var steps = ad::concat_cols({e, de, m.input(extras)});

  // residual conv layers batched as one GEMM over per-agent unfolds
  auto conv_batch = [&](const ad::Var& x, const ad::Conv1dParams& conv) {
    const int64_t pad = (conv.kernel - 1) / 2;
    std::vector<ad::Var> unfolded;
    unfolded.reserve(static_cast<size_t>(n_agents));
    for (int64_t a = 0; a < n_agents; ++a)
      unfolded.push_back(ad::unfold1d(ad::slice_rows(x, a * len, len), conv.kernel, pad));
    ad::Var y = ad::add_bias(
        ad::matmul(n_agents == 1 ? unfolded[0] : ad::concat_rows(unfolded), conv.w), conv.b);
    ad::Var skip = conv.skip_proj ? ad::linear(x, *conv.skip_proj) : x;
    return ad::relu(ad::add(y, skip));
  };
  ad::Var h1 = conv_batch(steps, m.conv1);
  ad::Var h2 = conv_batch(h1, m.conv2);

  // GRU scan over time with the agents as the batch; the final hidden state
  // is the trajectory embedding
  ad::Var hidden = ad::constant(Tensor::zeros({n_agents, m.cfg.hidden}, m.cfg.dtype));
  std::vector<int64_t> step_rows(static_cast<size_t>(n_agents));
  for (int64_t s = 0; s < len; ++s) {
    for (int64_t a = 0; a < n_agents; ++a) step_rows[static_cast<size_t>(a)] = a * len + s;
    hidden = ad::gru_cell(hidden, ad::gather_rows(h2, step_rows), m.history_gru);
  }
  return hidden;
}

namespace {

Tensor map_node_features(const Model& m, const LaneGraph& g) {
  Tensor base = g.feature_matrix();
  if (m.cfg.use_pairpose) return base;
  // ablation: geometry lives on the nodes in the global frame
  Tensor out = Tensor::zeros({base.rows(), base.cols() + 4});
  for (int64_t i = 0; i < base.rows(); ++i) {
    for (int64_t c = 0; c < base.cols(); ++c) out.set(i, c, base.at(i, c));
    const auto& p = g.nodes[static_cast<size_t>(i)].pose;
    out.set(i, base.cols() + 0, p.c.x);
    out.set(i, base.cols() + 1, p.c.y);
    out.set(i, base.cols() + 2, p.h.x);
    out.set(i, base.cols() + 3, p.h.y);
  }
  return out;
}

std::vector<Pose2> map_poses(const LaneGraph& g) {
  std::vector<Pose2> out;
  out.reserve(g.nodes.size());
  for (const auto& n : g.nodes) out.push_back(n.pose);
  return out;
}

}  // namespace

// Map-to-map edge classes in the schema order of map_edge_class_names(),
// replicated for `copies` stacked map blocks starting at `offset`.
void append_map_edges(std::vector<EdgeSet>& edges, const LaneGraph& g, int32_t cls,
                      int64_t offset, int64_t copies) {
  auto add = [&](const std::string& name,
                 const std::vector<std::pair<int32_t, int32_t>>& pairs) {
    EdgeSet e;
    e.name = name;
    e.src_class = cls;
    e.dst_class = cls;
    const int64_t m_nodes = g.node_count();
    e.src.reserve(pairs.size() * static_cast<size_t>(copies));
    e.dst.reserve(pairs.size() * static_cast<size_t>(copies));
    for (int64_t k = 0; k < copies; ++k)
      for (auto [i, j] : pairs) {
        e.src.push_back(offset + k * m_nodes + i);
        e.dst.push_back(offset + k * m_nodes + j);
      }
    edges.push_back(std::move(e));
  };
  for (int d = 0; d < kMaxDilation; ++d)
    add("succ_d" + std::to_string(d + 1), g.successor[static_cast<size_t>(d)]);
  for (int d = 0; d < kMaxDilation; ++d)
    add("pred_d" + std::to_string(d + 1), g.predecessor[static_cast<size_t>(d)]);
  add("left", g.left);
  add("right", g.right);
  add("conflict", g.conflict);
}

HeteroGraph lane_hetero_graph(const Model& m, const LaneGraph& g) {
  HeteroGraph hg;
  hg.n_freq = m.cfg.n_freq;
  hg.freq_sign = m.cfg.freq_sign;
  NodeSet map_nodes;
  map_nodes.name = "map";
  map_nodes.poses = map_poses(g);
  map_nodes.features = m.input(map_node_features(m, g));
  hg.nodes.push_back(std::move(map_nodes));
  append_map_edges(hg.edges, g, /*cls=*/0, /*offset=*/0, /*copies=*/1);
  hg.compute_rel_features();
  return hg;
}

ad::Var encode_lane_graph(const Model& m, const LaneGraph& g) {
  if (g.node_count() == 0) throw std::invalid_argument("encode_lane_graph: empty lane graph");
  HeteroGraph hg = lane_hetero_graph(m, g);
  return hmp_stack(hg, {hg.nodes[0].features}, m.lane_stage)[0];
}

std::vector<int64_t> nearest_map_nodes(const std::vector<AgentTrack>& agents,
                                       const LaneGraph& g) {
  if (g.node_count() == 0)
    throw std::invalid_argument("nearest_map_nodes: agents cannot anchor to an empty graph");
  std::vector<int64_t> out;
  out.reserve(agents.size());
  for (const auto& agent : agents) {
    const Vec2 p = agent.current_pose().c;
    int64_t best = 0;
    double best_d = (g.nodes[0].pose.c - p).norm();
    for (int64_t i = 1; i < g.node_count(); ++i) {
      const double d = (g.nodes[static_cast<size_t>(i)].pose.c - p).norm();
      if (d < best_d) {  // strict: ties keep the lowest index
        best_d = d;
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

HeteroGraph assemble_scene_graph(const Model& m, const std::vector<AgentTrack>& agents,
                                 const LaneGraph& g, ad::Var agent_features,
                                 ad::Var map_features) {
  if (g.node_count() == 0)
    throw std::invalid_argument("assemble_scene_graph: empty lane graph");
  HeteroGraph hg;
  hg.n_freq = m.cfg.n_freq;
  hg.freq_sign = m.cfg.freq_sign;

  NodeSet agent_ns;
  agent_ns.name = "agent";
  for (const auto& a : agents) agent_ns.poses.push_back(a.current_pose());
  agent_ns.features = agent_features;
  hg.nodes.push_back(std::move(agent_ns));

  NodeSet map_ns;
  map_ns.name = "map";
  map_ns.poses = map_poses(g);
  map_ns.features = map_features;
  hg.nodes.push_back(std::move(map_ns));

  append_map_edges(hg.edges, g, /*cls=*/1, /*offset=*/0, /*copies=*/1);

  const auto anchors = nearest_map_nodes(agents, g);
  EdgeSet a2m, m2a;
  a2m.name = "agent_map";
  a2m.src_class = 0;
  a2m.dst_class = 1;
  m2a.name = "map_agent";
  m2a.src_class = 1;
  m2a.dst_class = 0;
  for (size_t a = 0; a < agents.size(); ++a) {
    a2m.src.push_back(static_cast<int64_t>(a));
    a2m.dst.push_back(anchors[a]);
    m2a.src.push_back(anchors[a]);
    m2a.dst.push_back(static_cast<int64_t>(a));
  }
  hg.edges.push_back(std::move(a2m));
  hg.edges.push_back(std::move(m2a));

  EdgeSet a2a;
  a2a.name = "agent_agent";
  a2a.src_class = 0;
  a2a.dst_class = 0;
  for (size_t i = 0; i < agents.size(); ++i)
    for (size_t j = 0; j < agents.size(); ++j) {
      if (i == j) continue;
      if ((agents[i].current_pose().c - agents[j].current_pose().c).norm() < m.cfg.a2a_radius) {
        a2a.src.push_back(static_cast<int64_t>(i));
        a2a.dst.push_back(static_cast<int64_t>(j));
      }
    }
  hg.edges.push_back(std::move(a2a));

  hg.compute_rel_features();
  return hg;
}

SceneEmbedding encode_scene(const Model& m, const HeteroGraph& scene_graph) {
  auto out = hmp_stack(scene_graph,
                       {scene_graph.nodes[0].features, scene_graph.nodes[1].features},
                       m.scene_stage);
  return {out[0], out[1]};
}

}  // namespace relcast
