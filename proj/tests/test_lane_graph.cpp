#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "relcast/lane_graph.hpp"
#include "relcast/map_cache.hpp"
#include "relcast/rng.hpp"

using namespace relcast;

namespace {

LaneSpec straight_lane(int64_t id, Vec2 start, Vec2 dir, double length, int n_pts = 11) {
  LaneSpec lane;
  lane.id = id;
  const Vec2 d = dir.normalized();
  for (int i = 0; i < n_pts; ++i)
    lane.centerline.push_back(start + d * (length * i / (n_pts - 1.0)));
  return lane;
}

MapSource transformed(const MapSource& map, const Se2& t) {
  MapSource out = map;
  for (auto& lane : out.lanes)
    for (auto& p : lane.centerline) p = t.apply(p);
  for (auto& cw : out.crosswalks)
    for (auto& p : cw.polygon) p = t.apply(p);
  return out;
}

}  // namespace

TEST_CASE("straight 30m lane at 3m: 10 nodes, dilation edge counts") {
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 30.0));
  LaneGraph g = build_lane_graph(map, 3.0);
  CHECK(g.node_count() == 10);
  for (int k = 1; k <= 5; ++k)
    CHECK(static_cast<int>(g.successor[k - 1].size()) == 10 - k);
  CHECK(g.predecessor[0].size() == 9);
  // node poses sit at segment midpoints with heading +x
  CHECK(g.nodes[0].pose.c.x == doctest::Approx(1.5));
  CHECK(g.nodes[0].pose.h.x == doctest::Approx(1.0));
  CHECK(g.nodes[0].length == doctest::Approx(3.0));
  CHECK(g.nodes[0].curvature == doctest::Approx(0.0));
}

TEST_CASE("single-node lane graph has zero edges of every type") {
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 2.0, 3));
  LaneGraph g = build_lane_graph(map, 3.0);
  CHECK(g.node_count() == 1);
  for (int k = 0; k < 5; ++k) {
    CHECK(g.successor[k].empty());
    CHECK(g.predecessor[k].empty());
  }
  CHECK(g.left.empty());
  CHECK(g.right.empty());
  CHECK(g.conflict.empty());
}

TEST_CASE("degenerate and dangling inputs are rejected") {
  MapSource zero_len;
  zero_len.lanes.push_back({});
  zero_len.lanes[0].id = 1;
  zero_len.lanes[0].centerline = {{0, 0}, {0, 0}};
  CHECK_THROWS(build_lane_graph(zero_len, 3.0));

  MapSource dangling;
  dangling.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 10.0));
  dangling.lanes[0].successors = {42};
  CHECK_THROWS(build_lane_graph(dangling, 3.0));

  MapSource ok;
  ok.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 10.0));
  CHECK_THROWS(build_lane_graph(ok, -1.0));
}

TEST_CASE("parallel neighbor lanes: every node gets its lateral counterpart") {
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 30.0));
  map.lanes.push_back(straight_lane(2, {0, 3.5}, {1, 0}, 30.0));
  map.lanes[0].left_neighbor = 2;
  map.lanes[1].right_neighbor = 1;
  LaneGraph g = build_lane_graph(map, 3.0);
  CHECK(g.left.size() == 10);
  CHECK(g.right.size() == 10);
  for (auto [i, j] : g.left) {
    CHECK(g.nodes[i].entity_id == 1);
    CHECK(g.nodes[j].entity_id == 2);
    CHECK(std::abs(g.nodes[i].pose.c.x - g.nodes[j].pose.c.x) < 1.5);
  }
}

TEST_CASE("lane-to-lane successor edges follow topology") {
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 12.0));
  map.lanes.push_back(straight_lane(2, {12, 0}, {1, 0}, 12.0));
  map.lanes[0].successors = {2};
  map.lanes[1].predecessors = {1};
  LaneGraph g = build_lane_graph(map, 3.0);
  // 4 + 4 nodes; in-lane 3+3 edges plus one cross-lane edge
  CHECK(g.node_count() == 8);
  CHECK(g.successor[0].size() == 7);
  bool found = false;
  for (auto [i, j] : g.successor[0]) found = found || (i == 3 && j == 4);
  CHECK(found);
}

TEST_CASE("dilation-k equals k-th power of the dilation-1 adjacency") {
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 18.0));
  map.lanes.push_back(straight_lane(2, {18, 0}, {1, 0}, 9.0));
  map.lanes.push_back(straight_lane(3, {18, 2}, {2, 1}, 9.0));
  map.lanes[0].successors = {2, 3};  // fork
  LaneGraph g = build_lane_graph(map, 3.0);

  const size_t n = static_cast<size_t>(g.node_count());
  std::vector<std::vector<bool>> a1(n, std::vector<bool>(n, false));
  for (auto [i, j] : g.successor[0]) a1[i][j] = true;
  std::vector<std::vector<bool>> ak = a1;
  for (int k = 2; k <= 5; ++k) {
    // boolean matrix power step
    std::vector<std::vector<bool>> next(n, std::vector<bool>(n, false));
    for (size_t i = 0; i < n; ++i)
      for (size_t m = 0; m < n; ++m)
        if (ak[i][m])
          for (size_t j = 0; j < n; ++j)
            if (a1[m][j]) next[i][j] = true;
    ak = next;
    std::set<std::pair<int32_t, int32_t>> expected;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        if (ak[i][j] && i != j)
          expected.emplace(static_cast<int32_t>(i), static_cast<int32_t>(j));
    std::set<std::pair<int32_t, int32_t>> got(g.successor[k - 1].begin(),
                                              g.successor[k - 1].end());
    CHECK(got == expected);
  }
}

TEST_CASE("successor/predecessor transpose and no self-edges") {
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 30.0));
  map.lanes.push_back(straight_lane(2, {30, 0}, {1, 0}, 30.0));
  map.lanes[0].successors = {2};
  LaneGraph g = build_lane_graph(map, 3.0);
  for (int k = 0; k < 5; ++k) {
    std::set<std::pair<int32_t, int32_t>> st;
    for (auto [i, j] : g.successor[k]) {
      CHECK(i != j);
      st.emplace(j, i);
    }
    std::set<std::pair<int32_t, int32_t>> pt(g.predecessor[k].begin(), g.predecessor[k].end());
    CHECK(st == pt);
  }
}

TEST_CASE("curvature: straight zero, circle matches 1/R, mirror negates") {
  std::vector<Vec2> line = {{0, 0}, {5, 0}, {10, 0}, {15, 0}};
  CHECK(polyline_curvature(line, 7.0, 2.0) == 0.0);

  const double r = 25.0;
  std::vector<Vec2> arc, mirrored;
  for (int i = 0; i <= 60; ++i) {
    const double th = i * 0.02;
    arc.push_back({r * std::sin(th), r * (1.0 - std::cos(th))});
    mirrored.push_back({r * std::sin(th), -r * (1.0 - std::cos(th))});
  }
  const double mid = polyline_length(arc) / 2.0;
  const double k = polyline_curvature(arc, mid, 3.0);
  CHECK(std::abs(k - 1.0 / r) / (1.0 / r) < 0.05);
  CHECK(polyline_curvature(mirrored, mid, 3.0) == doctest::Approx(-k).epsilon(1e-9));
}

TEST_CASE("conflict edges: crossing lanes, same-entity exclusion, brute-force oracle") {
  MapSource map;
  map.lanes.push_back(straight_lane(1, {-15, 0}, {1, 0}, 30.0));
  map.lanes.push_back(straight_lane(2, {0, -15}, {0, 1}, 30.0));
  LaneGraph g = build_lane_graph(map, 3.0);
  add_conflict_edges(g, 2.5);
  CHECK(!g.conflict.empty());
  for (auto [i, j] : g.conflict) {
    CHECK(g.nodes[i].entity_id != g.nodes[j].entity_id);
    CHECK((g.nodes[i].pose.c - g.nodes[j].pose.c).norm() < 2.5);
  }
  // symmetric
  std::set<std::pair<int32_t, int32_t>> s(g.conflict.begin(), g.conflict.end());
  for (auto [i, j] : g.conflict) CHECK(s.count({j, i}) == 1);

  // same-lane consecutive nodes 3m apart never conflict
  MapSource solo;
  solo.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 30.0));
  LaneGraph gs = build_lane_graph(solo, 3.0);
  add_conflict_edges(gs, 3.5);
  CHECK(gs.conflict.empty());

  // random scatter of short lanes vs all-pairs oracle
  Rng rng(77);
  MapSource scatter;
  for (int64_t id = 1; id <= 12; ++id) {
    Vec2 start{rng.uniform(-20, 20), rng.uniform(-20, 20)};
    Vec2 dir{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (dir.norm() < 0.1) dir = {1, 0};
    scatter.lanes.push_back(straight_lane(id, start, dir, rng.uniform(5, 15)));
  }
  LaneGraph gr = build_lane_graph(scatter, 3.0);
  add_conflict_edges(gr, 2.5);
  std::set<std::pair<int32_t, int32_t>> oracle;
  for (int32_t i = 0; i < gr.node_count(); ++i)
    for (int32_t j = 0; j < gr.node_count(); ++j) {
      if (i == j) continue;
      const auto &a = gr.nodes[i], &b = gr.nodes[j];
      if (a.entity_id == b.entity_id && a.is_crosswalk == b.is_crosswalk) continue;
      if ((a.pose.c - b.pose.c).norm() < 2.5) oracle.emplace(i, j);
    }
  CHECK(std::set<std::pair<int32_t, int32_t>>(gr.conflict.begin(), gr.conflict.end()) ==
        oracle);
}

TEST_CASE("crosswalk nodes: zero-filled lane slots, crosswalk flag, chain conflicts") {
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 30.0));
  CrosswalkSpec cw;
  cw.id = 9;
  cw.polygon = {{10, -3}, {14, -3}, {14, 3}, {10, 3}};
  map.crosswalks.push_back(cw);
  LaneGraph g = build_lane_graph(map, 3.0);

  int n_cw = 0;
  for (const auto& n : g.nodes)
    if (n.is_crosswalk) ++n_cw;
  CHECK(n_cw >= 4);

  Tensor f = g.feature_matrix();
  CHECK(f.cols() == LaneGraph::kFeatureWidth);
  for (int64_t i = 0; i < g.node_count(); ++i) {
    if (!g.nodes[i].is_crosswalk) continue;
    CHECK(f.at(i, 1) == 0.0);   // width slot
    CHECK(f.at(i, 3) == 0.0);   // speed limit slot
    CHECK(f.at(i, 21) == 1.0);  // crosswalk flag
    for (int64_t c = 4; c <= 17; ++c) CHECK(f.at(i, c) == 0.0);
  }
  // chain conflicts exist before proximity pass
  bool chain = false;
  for (auto [i, j] : g.conflict)
    chain = chain || (g.nodes[i].is_crosswalk && g.nodes[j].is_crosswalk);
  CHECK(chain);
  // crossing the road picks up lane-crosswalk conflicts
  add_conflict_edges(g, 2.5);
  bool mixed = false;
  for (auto [i, j] : g.conflict)
    mixed = mixed || (g.nodes[i].is_crosswalk != g.nodes[j].is_crosswalk);
  CHECK(mixed);
}

TEST_CASE("rigid transform: features and edge structure invariant, determinism") {
  Rng rng(31);
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 30.0));
  map.lanes.push_back(straight_lane(2, {30, 0}, {1, 0.2}, 21.0));
  map.lanes.push_back(straight_lane(3, {0, 3.5}, {1, 0}, 30.0));
  map.lanes[0].successors = {2};
  map.lanes[0].left_neighbor = 3;
  map.lanes[2].right_neighbor = 1;
  CrosswalkSpec cw;
  cw.id = 7;
  cw.polygon = {{5, -2}, {8, -2}, {8, 5}, {5, 5}};
  map.crosswalks.push_back(cw);

  LaneGraph g1 = build_lane_graph(map, 3.0);
  add_conflict_edges(g1, 2.5);
  LaneGraph g2 = build_lane_graph(map, 3.0);
  add_conflict_edges(g2, 2.5);
  CHECK(g1.content_hash() == g2.content_hash());  // deterministic rebuild

  const Se2 t = Se2::from_angle(rng.uniform(0, 2 * M_PI), {rng.uniform(-50, 50), 13.0});
  LaneGraph gt = build_lane_graph(transformed(map, t), 3.0);
  add_conflict_edges(gt, 2.5);
  REQUIRE(gt.node_count() == g1.node_count());
  CHECK(gt.successor == g1.successor);
  CHECK(gt.predecessor == g1.predecessor);
  CHECK(gt.left == g1.left);
  CHECK(gt.right == g1.right);
  CHECK(gt.conflict == g1.conflict);
  Tensor f1 = g1.feature_matrix(), ft = gt.feature_matrix();
  for (int64_t i = 0; i < f1.size(); ++i) CHECK(std::abs(f1.at(i) - ft.at(i)) < 1e-9);
  // poses moved with the transform
  CHECK(std::abs(gt.nodes[0].pose.c.x - t.apply(g1.nodes[0].pose.c).x) < 1e-9);
}

TEST_CASE("map jsonl round trip") {
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0.25, -1.5}, {1, 0.1}, 25.0));
  map.lanes[0].left_boundary = {BoundaryType::dashed, BoundaryColor::yellow};
  map.lanes[0].speed_limit = 11.25;
  map.lanes[0].left_neighbor = 2;
  map.lanes.push_back(straight_lane(2, {0, 2}, {1, 0.1}, 25.0));
  CrosswalkSpec cw;
  cw.id = 3;
  cw.polygon = {{1, 1}, {2, 1}, {2, 2}};
  map.crosswalks.push_back(cw);

  auto path = std::filesystem::temp_directory_path() / "relcast_map_test.jsonl";
  write_map_jsonl(path.string(), map);
  MapSource back = read_map_jsonl(path.string());
  REQUIRE(back.lanes.size() == 2);
  REQUIRE(back.crosswalks.size() == 1);
  CHECK(back.lanes[0].speed_limit == 11.25);
  CHECK(back.lanes[0].left_boundary.type == BoundaryType::dashed);
  CHECK(back.lanes[0].left_boundary.color == BoundaryColor::yellow);
  CHECK(back.lanes[0].left_neighbor.value() == 2);
  CHECK(build_lane_graph(back, 3.0).content_hash() ==
        build_lane_graph(map, 3.0).content_hash());
  CHECK_THROWS(map_from_json_lines({"{\"type\":\"lane\", broken"}));
  CHECK_THROWS(map_from_json_lines({"{\"type\":\"volcano\",\"id\":1}"}));
  std::filesystem::remove(path);
}

TEST_CASE("embedding cache: round trip, graph perturbation and checkpoint mismatch") {
  Rng rng(3);
  MapSource map;
  map.lanes.push_back(straight_lane(1, {0, 0}, {1, 0}, 30.0));
  LaneGraph g = build_lane_graph(map, 3.0);

  Tensor emb = Tensor::zeros({g.node_count(), 16});
  for (int64_t i = 0; i < emb.size(); ++i) emb.set(i, rng.uniform(-1, 1));

  auto path = std::filesystem::temp_directory_path() / "relcast_cache_test.bin";
  cache_store(path.string(), g, emb, /*checkpoint_hash=*/0xabcdef);

  auto hit = cache_load(path.string(), g, 0xabcdef);
  REQUIRE(hit.has_value());
  for (int64_t i = 0; i < emb.size(); ++i) CHECK(hit->at(i) == emb.at(i));  // bit identical

  // one node moved -> different hash -> miss
  MapSource moved = map;
  moved.lanes[0].centerline[3].y += 0.5;
  LaneGraph gm = build_lane_graph(moved, 3.0);
  CHECK(!cache_load(path.string(), gm, 0xabcdef).has_value());
  // different producing checkpoint -> miss
  CHECK(!cache_load(path.string(), g, 0x123).has_value());

  // corrupt file throws rather than returning stale data
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "garbage";
  }
  CHECK_THROWS(cache_load(path.string(), g, 0xabcdef));
  std::filesystem::remove(path);

  CHECK_THROWS(cache_store(path.string(), g, Tensor::zeros({3, 16}), 1));
}
