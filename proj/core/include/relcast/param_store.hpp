#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "relcast/autodiff.hpp"
#include "relcast/rng.hpp"

namespace relcast::ad {

enum class Init { zeros, uniform_fan_in };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Owns every named parameter leaf plus Adam state. Iteration order is the
/// name order (std::map), which keeps updates and checkpoints deterministic.
class ParamStore {
 public:
  explicit ParamStore(Dtype dt = Dtype::f64) : dtype_(dt) {}

  /// Creates (or returns the existing) parameter. Fan-in init draws from
  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) where fan_in is the first dim.
  Var create(const std::string& name, std::vector<int64_t> shape, Init init, Rng& rng);
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  void zero_grad();
  /// One Adam update from the accumulated gradients. `grad_scale` divides
  /// every gradient first (used to average over a batch accumulated by
  /// repeated backward calls).
  void adamStep(double lr, double grad_scale = 1.0, const AdamConfig& cfg = {});

  int64_t step_count() const { return step_; }
  Dtype dtype() const { return dtype_; }
  std::vector<std::string> names() const;
  int64_t total_size() const;

  struct Entry {
    Var var;
    Tensor m, v;  // Adam moments
  };
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }
  void set_step_count(int64_t s) { step_ = s; }

 private:
  Dtype dtype_;
  std::map<std::string, Entry> entries_;
  int64_t step_ = 0;
};

/// Step decay: lr * decay^floor(epoch / step_size), epochs counted from 0.
double scheduled_lr(double base_lr, int epoch, double decay = 0.25, int step_size = 15);

}  // namespace relcast::ad
