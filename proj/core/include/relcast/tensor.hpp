#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace relcast {

/// Element type of a Tensor. f64 is the default everywhere; f32 is selectable
/// for benchmarking and deployment-style inference.
enum class Dtype : uint8_t { f32 = 0, f64 = 1 };

const char* dtype_name(Dtype dt);
std::size_t dtype_size(Dtype dt);

/// Dense row-major tensor of rank 1 or 2. Values live in exactly one of the
/// two backing vectors, selected by dtype.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape, Dtype dt = Dtype::f64);
  static Tensor full(std::vector<int64_t> shape, double v, Dtype dt = Dtype::f64);
  /// Builds an f64 tensor from explicit values (row-major).
  static Tensor of(std::vector<int64_t> shape, std::vector<double> values);
  static Tensor scalar(double v, Dtype dt = Dtype::f64);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const;
  /// Row/column accessors for rank-2 tensors; a rank-1 tensor of length N is
  /// treated as N rows of width 1 by ops that need a matrix view.
  int64_t rows() const;
  int64_t cols() const;
  Dtype dtype() const { return dtype_; }

  double at(int64_t i) const;
  double at(int64_t r, int64_t c) const { return at(r * cols() + c); }
  void set(int64_t i, double v);
  void set(int64_t r, int64_t c, double v) { set(r * cols() + c, v); }

  template <typename T>
  std::span<T> data();
  template <typename T>
  std::span<const T> data() const;

  Tensor to(Dtype dt) const;
  Tensor reshaped(std::vector<int64_t> shape) const;
  std::vector<double> to_vector() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_str() const;

 private:
  Dtype dtype_ = Dtype::f64;
  std::vector<int64_t> shape_;
  std::vector<float> f32_;
  std::vector<double> f64_;
};

/// Throws std::runtime_error if any element is NaN or infinite.
void ensure_finite(const Tensor& t, const char* op_name);

}  // namespace relcast
