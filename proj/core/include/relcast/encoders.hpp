#pragma once

#include "relcast/model.hpp"

namespace relcast {

/// Agent history embeddings, one row per track, computed in a single batch
/// (equal to per-agent sequential encoding). Every track must share the same
/// history length and have an observed current step.
ad::Var encode_history(const Model& m, const std::vector<AgentTrack>& tracks);

/// HeteroGraph view of a lane graph: a single "map" node class plus the 13
/// map-to-map edge classes (dilated successors/predecessors, lateral,
/// conflict).
HeteroGraph lane_hetero_graph(const Model& m, const LaneGraph& g);

/// Lane-graph encoder: HMP stack over the lane hetero graph. Output rows are
/// cacheable offline (MapEmbeddingCache).
ad::Var encode_lane_graph(const Model& m, const LaneGraph& g);

/// Nearest lane-graph node per agent at t=0 (centroid distance, ties to the
/// lowest index). Throws if the graph is empty.
std::vector<int64_t> nearest_map_nodes(const std::vector<AgentTrack>& agents,
                                       const LaneGraph& g);

/// Appends the 13 map-to-map edge classes between node class `cls` and
/// itself, replicated for `copies` stacked map blocks starting at `offset`
/// (the goal decoder copies the map once per agent).
void append_map_edges(std::vector<EdgeSet>& edges, const LaneGraph& g, int32_t cls,
                      int64_t offset = 0, int64_t copies = 1);

/// Scene graph: {agent, map} classes, map-to-map edges preserved, one
/// agent<->map edge pair per agent to its nearest node, and agent-to-agent
/// edges between all pairs closer than the radius.
HeteroGraph assemble_scene_graph(const Model& m, const std::vector<AgentTrack>& agents,
                                 const LaneGraph& g, ad::Var agent_features,
                                 ad::Var map_features);

struct SceneEmbedding {
  ad::Var agents;  // [A x H]
  ad::Var map;     // [M x H]
};

/// Heterogeneous scene encoder: both classes update simultaneously each
/// layer.
SceneEmbedding encode_scene(const Model& m, const HeteroGraph& scene_graph);

}  // namespace relcast
