#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "relcast/geometry.hpp"
#include "relcast/rng.hpp"

using namespace relcast;

namespace {

Pose2 random_pose(Rng& rng, double span = 50.0) {
  return Pose2::from_angle({rng.uniform(-span, span), rng.uniform(-span, span)},
                           rng.uniform(0.0, 2.0 * M_PI));
}

Se2 random_rigid(Rng& rng, double span = 100.0) {
  return Se2::from_angle(rng.uniform(0.0, 2.0 * M_PI),
                         {rng.uniform(-span, span), rng.uniform(-span, span)});
}

double max_diff(const RelGeom& a, const RelGeom& b) {
  double m = std::max({std::abs(a.sin_alpha - b.sin_alpha), std::abs(a.cos_alpha - b.cos_alpha),
                       std::abs(a.sin_beta - b.sin_beta), std::abs(a.cos_beta - b.cos_beta)});
  for (size_t i = 0; i < a.dist_encoding.size(); ++i)
    m = std::max(m, std::abs(a.dist_encoding[i] - b.dist_encoding[i]));
  return m;
}

}  // namespace

TEST_CASE("se2: identity, rotation, inverse round trip") {
  Pose2 p = Pose2::from_angle({3.0, -2.0}, 0.4);
  Pose2 same = Se2::identity().apply(p);
  CHECK(same.c.x == p.c.x);
  CHECK(same.h.y == p.h.y);

  Pose2 east{{0, 0}, {1, 0}};
  Pose2 rot = Se2::from_angle(M_PI / 2).apply(east);
  CHECK(rot.h.x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rot.h.y == doctest::Approx(1.0).epsilon(1e-15));

  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Se2 t = random_rigid(rng);
    Pose2 q = random_pose(rng);
    Pose2 back = t.inverse().apply(t.apply(q));
    CHECK(std::abs(back.c.x - q.c.x) < 1e-12);
    CHECK(std::abs(back.c.y - q.c.y) < 1e-12);
    CHECK(std::abs(back.h.x - q.h.x) < 1e-12);
    CHECK(std::abs(back.h.y - q.h.y) < 1e-12);
  }
}

TEST_CASE("sinusoid bank: zero distance, single frequency, scalar loop oracle") {
  auto zero = sinusoid_bank(0.0, 16);
  for (int n = 0; n < 16; ++n) {
    CHECK(zero[n] == 0.0);
    CHECK(zero[16 + n] == 1.0);
  }

  // N=1: the only term has unit angular frequency for either sign
  for (int sign : {-1, 1}) {
    auto one = sinusoid_bank(1.7, 1, sign);
    CHECK(one[0] == doctest::Approx(std::sin(1.7)).epsilon(1e-15));
    CHECK(one[1] == doctest::Approx(std::cos(1.7)).epsilon(1e-15));
  }

  for (int sign : {-1, 1}) {
    auto got = sinusoid_bank(2.5, 16, sign);
    for (int n = 0; n < 16; ++n) {
      const double f = std::exp(sign * 4.0 * n / 16.0);
      CHECK(got[n] == doctest::Approx(std::sin(2.5 * f)).epsilon(1e-12));
      CHECK(got[16 + n] == doctest::Approx(std::cos(2.5 * f)).epsilon(1e-12));
    }
  }
  CHECK_THROWS(sinusoid_bank(-1.0, 16));
  CHECK_THROWS(sinusoid_bank(1.0, 0));

  // decaying default covers hundreds of meters: lowest frequency wavelength
  const double lowest = std::exp(-4.0 * 15.0 / 16.0);
  CHECK(2.0 * M_PI / lowest > 200.0);
}

TEST_CASE("rel_geom: identity pair and hand geometry") {
  Pose2 p = Pose2::from_angle({4.0, 1.0}, 1.1);
  RelGeom self = rel_geom(p, p, 16);
  CHECK(self.sin_alpha == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(self.cos_alpha == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(self.sin_beta == 0.0);  // degenerate convention
  CHECK(self.cos_beta == 1.0);
  for (int n = 0; n < 16; ++n) {
    CHECK(self.dist_encoding[n] == 0.0);
    CHECK(self.dist_encoding[16 + n] == 1.0);
  }

  // dst at origin heading +x, src at (3,0) heading +y
  Pose2 dst{{0, 0}, {1, 0}};
  Pose2 src{{3, 0}, {0, 1}};
  RelGeom g = rel_geom(src, dst, 4);
  CHECK(g.cos_alpha == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(g.sin_alpha == doctest::Approx(src.h.cross(dst.h)).epsilon(1e-15));
  CHECK(g.sin_alpha == doctest::Approx(-1.0).epsilon(1e-15));  // pinned sign convention
  CHECK(g.sin_beta == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(g.cos_beta == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.dist_encoding[0] == doctest::Approx(std::sin(3.0)).epsilon(1e-12));
}

TEST_CASE("rel_geom invariance under random rigid transforms") {
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    Pose2 a = random_pose(rng), b = random_pose(rng);
    Se2 t = random_rigid(rng);
    RelGeom orig = rel_geom(a, b, 16);
    RelGeom moved = rel_geom(t.apply(a), t.apply(b), 16);
    CHECK(max_diff(orig, moved) < 1e-9);
  }
}

TEST_CASE("rel_geom algebraic properties") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    Pose2 a = random_pose(rng), b = random_pose(rng);
    RelGeom ab = rel_geom(a, b, 8);
    RelGeom ba = rel_geom(b, a, 8);
    // alpha antisymmetry
    CHECK(ab.sin_alpha == doctest::Approx(-ba.sin_alpha).epsilon(1e-12));
    CHECK(ab.cos_alpha == doctest::Approx(ba.cos_alpha).epsilon(1e-12));
    // unit circle
    CHECK(ab.sin_alpha * ab.sin_alpha + ab.cos_alpha * ab.cos_alpha ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ab.sin_beta * ab.sin_beta + ab.cos_beta * ab.cos_beta ==
          doctest::Approx(1.0).epsilon(1e-9));
    // bounded encoding
    for (double v : ab.dist_encoding) CHECK(std::abs(v) <= 1.0);
    // feature vector layout
    auto vec = ab.to_vector();
    CHECK(static_cast<int64_t>(vec.size()) == RelGeom::width(8));
    CHECK(vec[0] == ab.sin_alpha);
    CHECK(vec[4] == ab.dist_encoding[0]);
  }
}

TEST_CASE("goal features: alpha slots zeroed, rigid invariance") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    Pose2 dst = random_pose(rng);
    Vec2 goal{rng.uniform(-40, 40), rng.uniform(-40, 40)};
    auto f = goal_rel_features(goal, dst, 16);
    CHECK(f[0] == 0.0);
    CHECK(f[1] == 0.0);
    Se2 t = random_rigid(rng);
    auto g = goal_rel_features(t.apply(goal), t.apply(dst), 16);
    for (size_t k = 0; k < f.size(); ++k) CHECK(std::abs(f[k] - g[k]) < 1e-9);
  }
}

TEST_CASE("pose validation rejects non-unit headings") {
  Pose2 bad{{0, 0}, {1.0, 0.5}};
  CHECK_THROWS(bad.validate());
  CHECK_THROWS(rel_geom(bad, Pose2{}, 4));
}
