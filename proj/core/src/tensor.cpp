#include "relcast/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace relcast {

const char* dtype_name(Dtype dt) { return dt == Dtype::f32 ? "f32" : "f64"; }
std::size_t dtype_size(Dtype dt) { return dt == Dtype::f32 ? 4 : 8; }

namespace {
int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor Tensor::zeros(std::vector<int64_t> shape, Dtype dt) {
  Tensor t;
  t.dtype_ = dt;
  t.shape_ = std::move(shape);
  int64_t n = shape_product(t.shape_);
  if (dt == Dtype::f32)
    t.f32_.assign(static_cast<size_t>(n), 0.0f);
  else
    t.f64_.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double v, Dtype dt) {
  Tensor t = zeros(std::move(shape), dt);
  for (int64_t i = 0; i < t.size(); ++i) t.set(i, v);
  return t;
}

Tensor Tensor::of(std::vector<int64_t> shape, std::vector<double> values) {
  Tensor t;
  t.dtype_ = Dtype::f64;
  t.shape_ = std::move(shape);
  if (shape_product(t.shape_) != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("tensor: value count does not match shape");
  t.f64_ = std::move(values);
  return t;
}

Tensor Tensor::scalar(double v, Dtype dt) { return full({1}, v, dt); }

int64_t Tensor::size() const { return shape_.empty() ? 0 : shape_product(shape_); }

int64_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  return shape_[0];
}

int64_t Tensor::cols() const {
  if (shape_.size() < 2) return shape_.empty() ? 0 : 1;
  return shape_[1];
}

double Tensor::at(int64_t i) const {
  return dtype_ == Dtype::f32 ? static_cast<double>(f32_[static_cast<size_t>(i)])
                              : f64_[static_cast<size_t>(i)];
}

void Tensor::set(int64_t i, double v) {
  if (dtype_ == Dtype::f32)
    f32_[static_cast<size_t>(i)] = static_cast<float>(v);
  else
    f64_[static_cast<size_t>(i)] = v;
}

template <>
std::span<float> Tensor::data<float>() {
  if (dtype_ != Dtype::f32) throw std::logic_error("tensor: dtype is not f32");
  return f32_;
}
template <>
std::span<double> Tensor::data<double>() {
  if (dtype_ != Dtype::f64) throw std::logic_error("tensor: dtype is not f64");
  return f64_;
}
template <>
std::span<const float> Tensor::data<float>() const {
  if (dtype_ != Dtype::f32) throw std::logic_error("tensor: dtype is not f32");
  return f32_;
}
template <>
std::span<const double> Tensor::data<double>() const {
  if (dtype_ != Dtype::f64) throw std::logic_error("tensor: dtype is not f64");
  return f64_;
}

Tensor Tensor::to(Dtype dt) const {
  if (dt == dtype_) return *this;
  Tensor t = zeros(shape_, dt);
  for (int64_t i = 0; i < size(); ++i) t.set(i, at(i));
  return t;
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  if (shape_product(shape) != size())
    throw std::invalid_argument("tensor: reshape size mismatch");
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

std::vector<double> Tensor::to_vector() const {
  std::vector<double> out(static_cast<size_t>(size()));
  for (int64_t i = 0; i < size(); ++i) out[static_cast<size_t>(i)] = at(i);
  return out;
}

bool Tensor::all_finite() const {
  if (dtype_ == Dtype::f32) {
    for (float v : f32_)
      if (!std::isfinite(v)) return false;
  } else {
    for (double v : f64_)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

void ensure_finite(const Tensor& t, const char* op_name) {
  if (!t.all_finite())
    throw std::runtime_error(std::string("non-finite values produced by ") + op_name);
}

}  // namespace relcast
