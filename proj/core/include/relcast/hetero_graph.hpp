#pragma once

#include <string>
#include <vector>

#include "relcast/autodiff.hpp"
#include "relcast/geometry.hpp"

namespace relcast {

/// One semantic node category: per-node poses plus a feature table whose
/// width is class-specific. Features are tape handles so they can be either
/// constants (cached embeddings) or live activations.
struct NodeSet {
  std::string name;
  std::vector<Pose2> poses;
  ad::Var features;  // [N x F]

  int64_t count() const { return static_cast<int64_t>(poses.size()); }
};

/// One discrete edge class: directed (src -> dst) index pairs between two
/// node classes plus the raw pair-wise relative geometry of the endpoint
/// poses (one row per edge, width 4 + 2*n_freq).
struct EdgeSet {
  std::string name;
  int32_t src_class = 0;
  int32_t dst_class = 0;
  std::vector<int64_t> src, dst;
  Tensor rel_features;

  int64_t count() const { return static_cast<int64_t>(src.size()); }
};

struct HeteroGraph {
  std::vector<NodeSet> nodes;
  std::vector<EdgeSet> edges;
  int n_freq = 16;
  int freq_sign = -1;

  /// Checks index ranges and attribute row counts; throws on violation.
  void validate() const;
  /// Fills edge.rel_features from the endpoint poses of every edge class.
  void compute_rel_features();
};

/// Convenience builder for one edge class; rel features are computed lazily
/// by HeteroGraph::compute_rel_features.
EdgeSet make_edges(std::string name, int32_t src_class, int32_t dst_class,
                   std::vector<std::pair<int32_t, int32_t>> pairs);

}  // namespace relcast
