#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "relcast/autodiff.hpp"
#include "relcast/rng.hpp"

namespace relcast::testutil {

inline Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.set(i, rng.uniform(lo, hi));
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

/// Checks the reverse-mode gradient of `loss_fn` (a scalar function of the
/// given leaves) against central finite differences. Returns the worst
/// relative error over every element of every leaf.
inline double finite_diff_check(
    const std::function<ad::Var(const std::vector<ad::Var>&)>& loss_fn,
    std::vector<ad::Var> leaves, double eps = 1e-6) {
  ad::Var loss = loss_fn(leaves);
  ad::backward(loss);
  double worst = 0.0;
  for (auto& leaf : leaves) {
    Tensor analytic = leaf.grad();
    Tensor& value = leaf.node()->value;
    for (int64_t i = 0; i < value.size(); ++i) {
      const double orig = value.at(i);
      value.set(i, orig + eps);
      const double up = loss_fn(leaves).value().at(0);
      value.set(i, orig - eps);
      const double dn = loss_fn(leaves).value().at(0);
      value.set(i, orig);
      const double numeric = (up - dn) / (2.0 * eps);
      const double a = analytic.at(i);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace relcast::testutil
