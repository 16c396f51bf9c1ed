#include "relcast/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace relcast {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  uint32_t n = read_pod<uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_pod<uint8_t>(os, static_cast<uint8_t>(t.dtype()));
  write_pod<uint8_t>(os, static_cast<uint8_t>(t.rank()));
  for (int64_t d : t.shape()) write_pod<int64_t>(os, d);
  if (t.dtype() == Dtype::f32) {
    auto d = t.data<float>();
    os.write(reinterpret_cast<const char*>(d.data()),
             static_cast<std::streamsize>(d.size() * sizeof(float)));
  } else {
    auto d = t.data<double>();
    os.write(reinterpret_cast<const char*>(d.data()),
             static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
}

Tensor read_tensor(std::istream& is) {
  const Dtype dt = static_cast<Dtype>(read_pod<uint8_t>(is));
  const uint8_t rank = read_pod<uint8_t>(is);
  std::vector<int64_t> shape(rank);
  for (auto& d : shape) d = read_pod<int64_t>(is);
  Tensor t = Tensor::zeros(shape, dt);
  if (dt == Dtype::f32) {
    auto d = t.data<float>();
    is.read(reinterpret_cast<char*>(d.data()),
            static_cast<std::streamsize>(d.size() * sizeof(float)));
  } else {
    auto d = t.data<double>();
    is.read(reinterpret_cast<char*>(d.data()),
            static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
  return t;
}

}  // namespace

uint64_t fnv1a64(std::span<const uint8_t> bytes, uint64_t seed) {
  uint64_t h = seed;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open file for hashing: " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a64(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(buf),
                                         static_cast<size_t>(is.gcount())),
                h);
  }
  return h;
}

void save_checkpoint(const std::string& path, const ad::ParamStore& store,
                     const std::string& metadata_json, bool include_optimizer_state) {
  // Write-temp then rename so a crash never leaves a half-written file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + tmp);
    os.write(kMagic, 4);
    write_pod<uint32_t>(os, kVersion);
    write_string(os, metadata_json);
    write_pod<uint64_t>(os, store.entries().size());
    for (const auto& [name, e] : store.entries()) {
      write_string(os, name);
      write_tensor(os, e.var.value());
    }
    write_pod<uint8_t>(os, include_optimizer_state ? 1 : 0);
    if (include_optimizer_state) {
      write_pod<int64_t>(os, store.step_count());
      for (const auto& [name, e] : store.entries()) {
        write_tensor(os, e.m);
        write_tensor(os, e.v);
      }
    }
    if (!os) throw std::runtime_error("checkpoint: write failed");
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic bytes");
  const uint32_t version = read_pod<uint32_t>(is);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported format version");

  CheckpointData data;
  data.metadata_json = read_string(is);
  const uint64_t n = read_pod<uint64_t>(is);
  std::vector<std::string> order;
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = read_string(is);
    data.params[name] = read_tensor(is);
    order.push_back(std::move(name));
  }
  data.has_optimizer_state = read_pod<uint8_t>(is) != 0;
  if (data.has_optimizer_state) {
    data.step_count = read_pod<int64_t>(is);
    for (const auto& name : order) {
      data.adam_m[name] = read_tensor(is);
      data.adam_v[name] = read_tensor(is);
    }
  }
  return data;
}

std::string checkpoint_metadata(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic bytes");
  if (read_pod<uint32_t>(is) != kVersion)
    throw std::runtime_error("checkpoint: unsupported format version");
  return read_string(is);
}

void restore(ad::ParamStore& store, const CheckpointData& data) {
  for (auto& [name, e] : store.entries()) {
    auto it = data.params.find(name);
    if (it == data.params.end())
      throw std::runtime_error("checkpoint: missing parameter " + name);
    if (!it->second.same_shape(e.var.value()))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    e.var.node()->value = it->second.to(store.dtype());
    if (data.has_optimizer_state) {
      e.m = data.adam_m.at(name).to(store.dtype());
      e.v = data.adam_v.at(name).to(store.dtype());
    }
  }
  if (data.has_optimizer_state) store.set_step_count(data.step_count);
}

}  // namespace relcast
