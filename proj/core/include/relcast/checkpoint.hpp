#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "relcast/param_store.hpp"

namespace relcast {

/// FNV-1a, used for cache validation hashes.
uint64_t fnv1a64(std::span<const uint8_t> bytes, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a64_file(const std::string& path);

/// Versioned binary checkpoint: magic, version, a free-form metadata string
/// (model configuration as JSON), the name -> (dtype, shape, raw values)
/// table, and optionally the Adam state. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ad::ParamStore& store,
                     const std::string& metadata_json, bool include_optimizer_state);

struct CheckpointData {
  std::string metadata_json;
  std::map<std::string, Tensor> params;
  bool has_optimizer_state = false;
  int64_t step_count = 0;
  std::map<std::string, Tensor> adam_m, adam_v;
};

CheckpointData load_checkpoint(const std::string& path);
/// Reads only the metadata string (cheap model-config probe).
std::string checkpoint_metadata(const std::string& path);

/// Replaces the store contents with the checkpoint's tensors.
void restore(ad::ParamStore& store, const CheckpointData& data);

}  // namespace relcast
