#pragma once

#include "relcast/encoders.hpp"

namespace relcast {

/// Per (agent, map-node) goal scores: a classification logit and a 2D offset
/// expressed in the node's heading-aligned frame. Rows are component-major:
/// agent a's block is [a*M, (a+1)*M).
struct GoalField {
  ad::Var logits;   // [A*M x 1]
  ad::Var offsets;  // [A*M x 2]
  int64_t n_agents = 0;
  int64_t n_map_nodes = 0;

  /// Softmax over agent a's component logits (plain values).
  std::vector<double> agent_probs(int64_t a) const;
};

struct GoalPrediction {
  GoalField field;
  ad::Var actor_features;  // [A x H] decoder-updated agent embeddings
};

/// A disconnected components, one per agent: the agent node plus a full copy
/// of the map nodes (features from the scene encoder), map-to-map edges
/// preserved per copy, and complete actor<->map bipartite edges.
HeteroGraph build_goal_graph(const Model& m, const std::vector<AgentTrack>& agents,
                             const LaneGraph& g, const SceneEmbedding& scene);

/// HMP stack over the goal graph followed by the logit/offset heads.
GoalPrediction predict_goals(const Model& m, const HeteroGraph& goal_graph);

struct SamplerPick {
  int64_t node = 0;
  double prob = 0.0;  // renormalized over the K picks
};

/// Greedy K-mode sampler: argmax, remove everything within the hard radius,
/// downweight survivors within the downweight radius, repeat. If the active
/// set empties early the last pick is duplicated with its mass split. Mode
/// probabilities are the pre-sampling masses of the picks, renormalized.
std::vector<SamplerPick> greedy_sample(const std::vector<double>& probs,
                                       const std::vector<Vec2>& positions,
                                       const SamplerConfig& cfg);

/// Node-frame offset to world goal point and back (x-axis = node heading).
Vec2 node_frame_to_world(const Pose2& node, const Vec2& local);
Vec2 world_to_node_frame(const Pose2& node, const Vec2& world);

/// Trajectory completion for one agent and K goals in a single batched MLP
/// call. Output rows are agent-frame waypoints flattened [x1,y1,...]; the
/// agent frame has pose0's heading as its x-axis.
ad::Var complete_trajectory(const Model& m, const ad::Var& agent_embedding, const Pose2& pose0,
                            const std::vector<Vec2>& goals_world);

/// Converts completion rows to world-frame waypoint lists.
std::vector<std::vector<Vec2>> completion_to_world(const Tensor& rows, const Pose2& pose0);

}  // namespace relcast
