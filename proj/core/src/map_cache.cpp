#include "relcast/map_cache.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace relcast {

namespace {
constexpr char kMagic[4] = {'R', 'M', 'E', 'C'};
constexpr uint32_t kVersion = 1;
}  // namespace

void cache_store(const std::string& path, const LaneGraph& g, const Tensor& embeddings,
                 uint64_t checkpoint_hash) {
  if (embeddings.rank() != 2 || embeddings.rows() != g.node_count())
    throw std::invalid_argument("cache_store: one embedding row per graph node required");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open cache for writing: " + tmp);
    os.write(kMagic, 4);
    os.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    const uint64_t gh = g.content_hash();
    os.write(reinterpret_cast<const char*>(&gh), sizeof(gh));
    os.write(reinterpret_cast<const char*>(&checkpoint_hash), sizeof(checkpoint_hash));
    const uint8_t dt = static_cast<uint8_t>(embeddings.dtype());
    const int64_t rows = embeddings.rows(), cols = embeddings.cols();
    os.write(reinterpret_cast<const char*>(&dt), 1);
    os.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    os.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    if (embeddings.dtype() == Dtype::f32) {
      auto d = embeddings.data<float>();
      os.write(reinterpret_cast<const char*>(d.data()),
               static_cast<std::streamsize>(d.size() * sizeof(float)));
    } else {
      auto d = embeddings.data<double>();
      os.write(reinterpret_cast<const char*>(d.data()),
               static_cast<std::streamsize>(d.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("cache: write failed");
  }
  std::filesystem::rename(tmp, path);
}

MapEmbeddingCache cache_read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open cache: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("cache: bad magic bytes");
  uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!is || version != kVersion) throw std::runtime_error("cache: unsupported version");

  MapEmbeddingCache c;
  is.read(reinterpret_cast<char*>(&c.graph_hash), sizeof(c.graph_hash));
  is.read(reinterpret_cast<char*>(&c.checkpoint_hash), sizeof(c.checkpoint_hash));
  uint8_t dt = 0;
  int64_t rows = 0, cols = 0;
  is.read(reinterpret_cast<char*>(&dt), 1);
  is.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  is.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!is || rows < 0 || cols < 0) throw std::runtime_error("cache: truncated header");
  c.embeddings = Tensor::zeros({rows, cols}, static_cast<Dtype>(dt));
  if (c.embeddings.dtype() == Dtype::f32) {
    auto d = c.embeddings.data<float>();
    is.read(reinterpret_cast<char*>(d.data()),
            static_cast<std::streamsize>(d.size() * sizeof(float)));
  } else {
    auto d = c.embeddings.data<double>();
    is.read(reinterpret_cast<char*>(d.data()),
            static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!is) throw std::runtime_error("cache: truncated embedding data");
  return c;
}

std::optional<Tensor> cache_load(const std::string& path, const LaneGraph& g,
                                 uint64_t checkpoint_hash) {
  MapEmbeddingCache c = cache_read(path);
  if (c.graph_hash != g.content_hash() || c.checkpoint_hash != checkpoint_hash)
    return std::nullopt;  // stale, recompute upstream
  if (c.embeddings.rows() != g.node_count()) return std::nullopt;
  return c.embeddings;
}

}  // namespace relcast
