#include "relcast/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace relcast::ad {

Var ParamStore::create(const std::string& name, std::vector<int64_t> shape, Init init,
                       Rng& rng) {
  auto it = entries_.find(name);
  if (it != entries_.end()) return it->second.var;

  Tensor t = Tensor::zeros(shape, dtype_);
  if (init == Init::uniform_fan_in) {
    const double fan_in = static_cast<double>(shape.empty() ? 1 : shape[0]);
    const double limit = 1.0 / std::sqrt(std::max(1.0, fan_in));
    for (int64_t i = 0; i < t.size(); ++i) t.set(i, rng.uniform(-limit, limit));
  }
  Entry e;
  e.var = leaf(std::move(t), /*requires_grad=*/true);
  e.m = Tensor::zeros(shape, dtype_);
  e.v = Tensor::zeros(shape, dtype_);
  entries_.emplace(name, std::move(e));
  return entries_.at(name).var;
}

Var ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("param not found: " + name);
  return it->second.var;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) {
    Tensor& g = e.var.node()->grad_buffer();
    for (int64_t i = 0; i < g.size(); ++i) g.set(i, 0.0);
  }
}

void ParamStore::adamStep(double lr, double grad_scale, const AdamConfig& cfg) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (auto& [name, e] : entries_) {
    Tensor& p = e.var.node()->value;
    Tensor& g = e.var.node()->grad_buffer();
    if (!g.all_finite())
      throw std::runtime_error("adam: non-finite gradient for " + name);
    for (int64_t i = 0; i < p.size(); ++i) {
      const double gi = g.at(i) / grad_scale;
      const double mi = cfg.beta1 * e.m.at(i) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * e.v.at(i) + (1.0 - cfg.beta2) * gi * gi;
      e.m.set(i, mi);
      e.v.set(i, vi);
      p.set(i, p.at(i) - lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
    }
  }
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& [name, e] : entries_) n += e.var.value().size();
  return n;
}

double scheduled_lr(double base_lr, int epoch, double decay, int step_size) {
  if (epoch < 0 || step_size <= 0) throw std::invalid_argument("scheduled_lr: bad arguments");
  return base_lr * std::pow(decay, static_cast<double>(epoch / step_size));
}

}  // namespace relcast::ad
