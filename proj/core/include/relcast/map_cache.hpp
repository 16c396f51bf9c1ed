#pragma once

#include <optional>
#include <string>

#include "relcast/lane_graph.hpp"
#include "relcast/tensor.hpp"

namespace relcast {

/// Offline lane-graph embeddings keyed by the graph content hash and the
/// producing checkpoint hash. A cache is only served when both match.
struct MapEmbeddingCache {
  uint64_t graph_hash = 0;
  uint64_t checkpoint_hash = 0;
  Tensor embeddings;  // one row per lane-graph node
};

/// Writes atomically (temp file + rename). Row count must equal the graph's
/// node count.
void cache_store(const std::string& path, const LaneGraph& g, const Tensor& embeddings,
                 uint64_t checkpoint_hash);

/// Returns the embeddings when both hashes match; std::nullopt signals a
/// stale cache (graph changed or different checkpoint). Corrupt files throw.
std::optional<Tensor> cache_load(const std::string& path, const LaneGraph& g,
                                 uint64_t checkpoint_hash);

/// Raw read without validation (inspection/tooling).
MapEmbeddingCache cache_read(const std::string& path);

}  // namespace relcast
