#include "relcast/geometry.hpp"

#include <stdexcept>

namespace relcast {

namespace {
constexpr double kDegenerateDist = 1e-9;
}

Vec2 Vec2::normalized() const {
  const double n = norm();
  if (n < 1e-300) throw std::invalid_argument("cannot normalize zero vector");
  return {x / n, y / n};
}

void Pose2::validate() const {
  if (std::abs(h.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("pose heading must be unit-norm");
}

Pose2 Pose2::from_angle(Vec2 c, double theta) {
  return {c, {std::cos(theta), std::sin(theta)}};
}

Se2 Se2::from_angle(double theta, Vec2 translation) {
  return {std::cos(theta), std::sin(theta), translation};
}

Se2 Se2::inverse() const {
  // R^T, -R^T t
  return {cos_t, -sin_t, {-(cos_t * t.x + sin_t * t.y), -(-sin_t * t.x + cos_t * t.y)}};
}

Se2 Se2::compose(const Se2& inner) const {
  Se2 out;
  out.cos_t = cos_t * inner.cos_t - sin_t * inner.sin_t;
  out.sin_t = sin_t * inner.cos_t + cos_t * inner.sin_t;
  out.t = apply(inner.t);
  return out;
}

std::vector<double> RelGeom::to_vector() const {
  std::vector<double> out;
  out.reserve(4 + dist_encoding.size());
  out.push_back(sin_alpha);
  out.push_back(cos_alpha);
  out.push_back(sin_beta);
  out.push_back(cos_beta);
  out.insert(out.end(), dist_encoding.begin(), dist_encoding.end());
  return out;
}

std::vector<double> sinusoid_bank(double distance, int n_freq, int freq_sign) {
  if (distance < 0.0) throw std::invalid_argument("sinusoid_bank: negative distance");
  if (n_freq < 1) throw std::invalid_argument("sinusoid_bank: need at least one frequency");
  if (freq_sign != 1 && freq_sign != -1)
    throw std::invalid_argument("sinusoid_bank: sign must be +1 or -1");
  std::vector<double> out(2 * static_cast<size_t>(n_freq));
  for (int n = 0; n < n_freq; ++n) {
    const double freq = std::exp(freq_sign * 4.0 * n / static_cast<double>(n_freq));
    out[static_cast<size_t>(n)] = std::sin(distance * freq);
    out[static_cast<size_t>(n_freq + n)] = std::cos(distance * freq);
  }
  return out;
}

RelGeom rel_geom(const Pose2& src, const Pose2& dst, int n_freq, int freq_sign) {
  src.validate();
  dst.validate();
  RelGeom g;
  g.sin_alpha = src.h.cross(dst.h);
  g.cos_alpha = src.h.dot(dst.h);
  const Vec2 v = src.c - dst.c;
  const double d = v.norm();
  if (d < kDegenerateDist) {
    // Coincident centroids: beta is undefined, use (0, 1).
    g.sin_beta = 0.0;
    g.cos_beta = 1.0;
  } else {
    g.sin_beta = v.cross(dst.h) / d;
    g.cos_beta = v.dot(dst.h) / d;
  }
  g.dist_encoding = sinusoid_bank(d, n_freq, freq_sign);
  return g;
}

std::vector<double> goal_rel_features(const Vec2& goal, const Pose2& dst, int n_freq,
                                      int freq_sign) {
  dst.validate();
  std::vector<double> out(static_cast<size_t>(RelGeom::width(n_freq)));
  const Vec2 v = goal - dst.c;
  const double d = v.norm();
  if (d < kDegenerateDist) {
    out[2] = 0.0;
    out[3] = 1.0;
  } else {
    out[2] = v.cross(dst.h) / d;
    out[3] = v.dot(dst.h) / d;
  }
  auto bank = sinusoid_bank(d, n_freq, freq_sign);
  std::copy(bank.begin(), bank.end(), out.begin() + 4);
  return out;
}

}  // namespace relcast
