#pragma once

#include "relcast/hetero_graph.hpp"
#include "relcast/layers.hpp"
#include "relcast/param_store.hpp"

namespace relcast {

/// Weights for one message-passing layer: a message projection per edge
/// class (input width = source feature width + attribute width) and, per
/// node class, the self projection, fusion and GRU-update weights.
struct HmpLayerParams {
  std::vector<ad::LinearParams> message;     // indexed like HeteroGraph::edges
  std::vector<ad::LinearParams> state_proj;  // previous features -> hidden (GRU state)
  std::vector<ad::LinearParams> self_proj;
  std::vector<ad::LinearParams> fuse;        // [agg ++ self] -> hidden
  std::vector<ad::GruParams> update;
};

/// One pipeline stage: the stage-local encoding MLP for edge attributes plus
/// the layer stack. With use_pairpose off, messages see source features only
/// (the ablation baseline without edge attributes).
struct HmpStageParams {
  ad::MlpParams pairpose;  // (4 + 2*n_freq) -> attr_dim
  std::vector<HmpLayerParams> layers;
  bool use_pairpose = true;
};

/// Runs the stage PairPose MLP over every edge class once per forward pass.
std::vector<ad::Var> encode_edge_attrs(const HeteroGraph& g, const ad::MlpParams& pairpose);

/// One round of heterogeneous message passing: for every node, messages from
/// all incoming edges of all classes are max-pooled together (zeros if there
/// are none), concatenated with a projection of the node's own features,
/// fused, and pushed through a GRU update. Every node class updates
/// simultaneously from the previous features.
std::vector<ad::Var> hmp_layer(const HeteroGraph& g, const std::vector<ad::Var>& features,
                               const std::vector<ad::Var>& attrs, const HmpLayerParams& p,
                               bool use_pairpose);

/// Attribute encoding once, then the full layer stack.
std::vector<ad::Var> hmp_stack(const HeteroGraph& g, std::vector<ad::Var> features,
                               const HmpStageParams& p);

/// Parameter construction for a stage whose node classes enter with the
/// given feature widths. Names are "<prefix>.layer<i>.<role>...".
HmpStageParams make_hmp_stage(ad::ParamStore& store, Rng& rng, const std::string& prefix,
                              const std::vector<int64_t>& node_widths,
                              const std::vector<std::pair<int32_t, int32_t>>& edge_endpoints,
                              const std::vector<std::string>& edge_names, int64_t attr_dim,
                              int64_t hidden, int n_layers, int n_freq, bool use_pairpose);

}  // namespace relcast
