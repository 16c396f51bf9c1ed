#pragma once

#include <cmath>
#include <vector>

namespace relcast {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  /// 2D cross: a x b = a.x*b.y - a.y*b.x. The one sign convention used
  /// everywhere in this codebase.
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  Vec2 normalized() const;
  Vec2 perp() const { return {-y, x}; }  // rotate +90 degrees
};

/// 2D pose: centroid plus unit heading vector.
struct Pose2 {
  Vec2 c;
  Vec2 h{1.0, 0.0};

  /// Throws if the heading is not unit-norm within 1e-9.
  void validate() const;
  static Pose2 from_angle(Vec2 c, double theta);
};

/// Rigid SE(2) transform (rotation then translation).
struct Se2 {
  double cos_t = 1.0;
  double sin_t = 0.0;
  Vec2 t;

  static Se2 identity() { return {}; }
  static Se2 from_angle(double theta, Vec2 translation = {});

  Vec2 apply(const Vec2& p) const {
    return {cos_t * p.x - sin_t * p.y + t.x, sin_t * p.x + cos_t * p.y + t.y};
  }
  Vec2 rotate(const Vec2& v) const { return {cos_t * v.x - sin_t * v.y, sin_t * v.x + cos_t * v.y}; }
  Pose2 apply(const Pose2& p) const { return {apply(p.c), rotate(p.h)}; }
  Se2 inverse() const;
  Se2 compose(const Se2& inner) const;  // this * inner
};

/// Raw pair-wise relative geometry between two posed nodes: heading
/// difference (alpha), displacement-vs-destination-heading angle (beta) and a
/// bounded sinusoidal encoding of the centroid distance. Invariant under
/// rigid transforms of both poses by construction.
struct RelGeom {
  double sin_alpha = 0.0;
  double cos_alpha = 1.0;
  double sin_beta = 0.0;
  double cos_beta = 1.0;
  std::vector<double> dist_encoding;  // [p_0..p_{N-1}, r_0..r_{N-1}]

  /// [sin a, cos a, sin b, cos b] ++ dist_encoding, width 4 + 2N.
  std::vector<double> to_vector() const;
  static int64_t width(int n_freq) { return 4 + 2 * static_cast<int64_t>(n_freq); }
};

/// Frequencies follow exp(sign*4n/N) for n in 0..N-1. The growing (+1)
/// variant keeps every wavelength at or below 2*pi meters; the decaying (-1)
/// default stretches the bank out to hundreds of meters.
std::vector<double> sinusoid_bank(double distance, int n_freq, int freq_sign = -1);

/// Relative geometry of `src` as seen from `dst`.
RelGeom rel_geom(const Pose2& src, const Pose2& dst, int n_freq, int freq_sign = -1);

/// Goal conditioning features: same layout as RelGeom::to_vector but the goal
/// point has no heading, so both alpha slots are zeroed and beta is measured
/// against the destination heading only.
std::vector<double> goal_rel_features(const Vec2& goal, const Pose2& dst, int n_freq,
                                      int freq_sign = -1);

}  // namespace relcast
