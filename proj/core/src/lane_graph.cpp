#include "relcast/lane_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "relcast/checkpoint.hpp"

#include "json_util.hpp"

namespace relcast {

double polyline_length(const std::vector<Vec2>& pts) {
  double s = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) s += (pts[i] - pts[i - 1]).norm();
  return s;
}

Vec2 polyline_point_at(const std::vector<Vec2>& pts, double s) {
  if (pts.size() < 2) throw std::invalid_argument("polyline needs >= 2 points");
  if (s <= 0.0) return pts.front();
  for (size_t i = 1; i < pts.size(); ++i) {
    const double seg = (pts[i] - pts[i - 1]).norm();
    if (s <= seg) {
      const double t = seg > 0.0 ? s / seg : 0.0;
      return pts[i - 1] + (pts[i] - pts[i - 1]) * t;
    }
    s -= seg;
  }
  return pts.back();
}

double polyline_curvature(const std::vector<Vec2>& pts, double s, double half_span) {
  const double total = polyline_length(pts);
  if (total <= 0.0) return 0.0;
  const double lo = std::max(0.0, s - half_span);
  const double hi = std::min(total, s + half_span);
  const Vec2 a = polyline_point_at(pts, lo);
  const Vec2 b = polyline_point_at(pts, std::clamp(s, 0.0, total));
  const Vec2 c = polyline_point_at(pts, hi);
  const Vec2 ab = b - a, ac = c - a, bc = c - b;
  const double denom = ab.norm() * ac.norm() * bc.norm();
  if (denom < 1e-12) return 0.0;  // collinear or degenerate triple
  return 2.0 * ab.cross(ac) / denom;
}

namespace {

struct Segment {
  double s0, s1;
};

std::vector<Segment> split_arclength(double total, double interval) {
  const int64_t n =
      std::max<int64_t>(1, static_cast<int64_t>(std::floor(total / interval + 1e-9)));
  std::vector<Segment> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double s0 = static_cast<double>(i) * interval;
    const double s1 = (i + 1 == n) ? total : s0 + interval;  // remainder merges into the last
    out.push_back({s0, s1});
  }
  return out;
}

Pose2 segment_pose(const std::vector<Vec2>& pts, const Segment& seg) {
  const Vec2 a = polyline_point_at(pts, seg.s0);
  const Vec2 b = polyline_point_at(pts, seg.s1);
  const Vec2 chord = b - a;
  if (chord.norm() < 1e-12)
    throw std::invalid_argument("lane graph: degenerate (zero-length) segment");
  return {polyline_point_at(pts, 0.5 * (seg.s0 + seg.s1)), chord.normalized()};
}

}  // namespace

LaneGraph build_lane_graph(const MapSource& map, double interval) {
  if (interval <= 0.0) throw std::invalid_argument("build_lane_graph: interval must be > 0");

  std::map<int64_t, size_t> lane_by_id;
  for (size_t i = 0; i < map.lanes.size(); ++i) {
    if (map.lanes[i].centerline.size() < 2)
      throw std::invalid_argument("build_lane_graph: lane centerline needs >= 2 points");
    lane_by_id[map.lanes[i].id] = i;
  }
  auto check_ref = [&](int64_t id) {
    if (!lane_by_id.count(id))
      throw std::invalid_argument("build_lane_graph: dangling lane id reference " +
                                  std::to_string(id));
  };
  for (const auto& lane : map.lanes) {
    for (int64_t s : lane.successors) check_ref(s);
    for (int64_t p : lane.predecessors) check_ref(p);
    if (lane.left_neighbor) check_ref(*lane.left_neighbor);
    if (lane.right_neighbor) check_ref(*lane.right_neighbor);
  }

  LaneGraph g;
  struct EntityNodes {
    int32_t first = 0;
    int32_t count = 0;
  };
  std::map<int64_t, EntityNodes> lane_nodes;

  for (const auto& lane : map.lanes) {
    const double total = polyline_length(lane.centerline);
    if (total <= 1e-9)
      throw std::invalid_argument("build_lane_graph: zero-length lane " +
                                  std::to_string(lane.id));
    const auto segs = split_arclength(total, interval);
    EntityNodes en{static_cast<int32_t>(g.nodes.size()), static_cast<int32_t>(segs.size())};
    lane_nodes[lane.id] = en;
    for (const auto& seg : segs) {
      LaneGraphNode n;
      n.pose = segment_pose(lane.centerline, seg);
      n.entity_id = lane.id;
      n.is_crosswalk = false;
      n.length = seg.s1 - seg.s0;
      n.width = lane.width;
      n.curvature = polyline_curvature(lane.centerline, 0.5 * (seg.s0 + seg.s1), interval);
      n.speed_limit = lane.speed_limit;
      n.left_boundary = lane.left_boundary;
      n.right_boundary = lane.right_boundary;
      n.left_dist = 0.5 * lane.width;
      n.right_dist = 0.5 * lane.width;
      n.in_intersection = lane.in_intersection;
      n.arclength_frac = (0.5 * (seg.s0 + seg.s1)) / total;
      g.nodes.push_back(n);
    }
  }

  // dilation-1 successors: consecutive segments, then lane topology
  auto& succ1 = g.successor[0];
  for (const auto& lane : map.lanes) {
    const auto en = lane_nodes.at(lane.id);
    for (int32_t i = 0; i + 1 < en.count; ++i)
      succ1.emplace_back(en.first + i, en.first + i + 1);
  }
  for (const auto& lane : map.lanes) {
    const auto en = lane_nodes.at(lane.id);
    const int32_t last = en.first + en.count - 1;
    for (int64_t succ_id : lane.successors)
      succ1.emplace_back(last, lane_nodes.at(succ_id).first);
    // maps may declare topology from either side
    for (int64_t pred_id : lane.predecessors) {
      const auto pe = lane_nodes.at(pred_id);
      succ1.emplace_back(pe.first + pe.count - 1, en.first);
    }
  }
  std::sort(succ1.begin(), succ1.end());
  succ1.erase(std::unique(succ1.begin(), succ1.end()), succ1.end());

  // crosswalks: sample the closed perimeter; chain neighbors get conflict
  // edges (they are not drivable successors)
  for (const auto& cw : map.crosswalks) {
    if (cw.polygon.size() < 3)
      throw std::invalid_argument("build_lane_graph: crosswalk polygon needs >= 3 points");
    std::vector<Vec2> perimeter = cw.polygon;
    perimeter.push_back(cw.polygon.front());
    const double total = polyline_length(perimeter);
    if (total <= 1e-9)
      throw std::invalid_argument("build_lane_graph: degenerate crosswalk polygon");
    const auto segs = split_arclength(total, interval);
    const int32_t first = static_cast<int32_t>(g.nodes.size());
    for (const auto& seg : segs) {
      LaneGraphNode n;
      n.pose = segment_pose(perimeter, seg);
      n.entity_id = cw.id;
      n.is_crosswalk = true;
      n.length = seg.s1 - seg.s0;
      n.curvature = polyline_curvature(perimeter, 0.5 * (seg.s0 + seg.s1), interval);
      n.arclength_frac = (0.5 * (seg.s0 + seg.s1)) / total;
      g.nodes.push_back(n);
    }
    const int32_t count = static_cast<int32_t>(segs.size());
    for (int32_t i = 0; i < count && count > 1; ++i) {
      const int32_t j = (i + 1) % count;
      g.conflict.emplace_back(first + i, first + j);
      g.conflict.emplace_back(first + j, first + i);
    }
  }

  // dilations 2..5: exactly-k-hop successor reachability
  std::vector<std::vector<int32_t>> adj(g.nodes.size());
  for (auto [i, j] : succ1) adj[static_cast<size_t>(i)].push_back(j);
  for (size_t src = 0; src < g.nodes.size(); ++src) {
    std::set<int32_t> frontier(adj[src].begin(), adj[src].end());
    for (int k = 2; k <= kMaxDilation; ++k) {
      std::set<int32_t> next;
      for (int32_t m : frontier)
        for (int32_t n : adj[static_cast<size_t>(m)]) next.insert(n);
      frontier = std::move(next);
      for (int32_t dst : frontier)
        if (dst != static_cast<int32_t>(src))
          g.successor[static_cast<size_t>(k - 1)].emplace_back(static_cast<int32_t>(src), dst);
    }
  }
  for (int k = 0; k < kMaxDilation; ++k) {
    auto& pred = g.predecessor[static_cast<size_t>(k)];
    pred.reserve(g.successor[static_cast<size_t>(k)].size());
    for (auto [i, j] : g.successor[static_cast<size_t>(k)]) pred.emplace_back(j, i);
    std::sort(pred.begin(), pred.end());
  }

  // lateral edges: nearest arclength fraction on the neighbor lane
  auto nearest_by_frac = [&](const EntityNodes& en, double frac) {
    int32_t best = en.first;
    double best_d = std::abs(g.nodes[static_cast<size_t>(en.first)].arclength_frac - frac);
    for (int32_t i = 1; i < en.count; ++i) {
      const double d =
          std::abs(g.nodes[static_cast<size_t>(en.first + i)].arclength_frac - frac);
      if (d < best_d) {
        best_d = d;
        best = en.first + i;
      }
    }
    return best;
  };
  for (const auto& lane : map.lanes) {
    const auto en = lane_nodes.at(lane.id);
    for (int32_t i = 0; i < en.count; ++i) {
      const double frac = g.nodes[static_cast<size_t>(en.first + i)].arclength_frac;
      if (lane.left_neighbor)
        g.left.emplace_back(en.first + i,
                            nearest_by_frac(lane_nodes.at(*lane.left_neighbor), frac));
      if (lane.right_neighbor)
        g.right.emplace_back(en.first + i,
                             nearest_by_frac(lane_nodes.at(*lane.right_neighbor), frac));
    }
  }

  std::sort(g.conflict.begin(), g.conflict.end());
  g.conflict.erase(std::unique(g.conflict.begin(), g.conflict.end()), g.conflict.end());
  return g;
}

void add_conflict_edges(LaneGraph& g, double radius) {
  if (radius <= 0.0) throw std::invalid_argument("add_conflict_edges: radius must be > 0");
  // Uniform grid with cell == radius; candidate pairs live in the 3x3 block.
  using Cell = std::pair<int64_t, int64_t>;
  std::map<Cell, std::vector<int32_t>> grid;
  auto cell_of = [radius](const Vec2& p) {
    return Cell{static_cast<int64_t>(std::floor(p.x / radius)),
                static_cast<int64_t>(std::floor(p.y / radius))};
  };
  for (int32_t i = 0; i < g.node_count(); ++i)
    grid[cell_of(g.nodes[static_cast<size_t>(i)].pose.c)].push_back(i);

  std::set<std::pair<int32_t, int32_t>> pairs(g.conflict.begin(), g.conflict.end());
  for (int32_t i = 0; i < g.node_count(); ++i) {
    const auto& ni = g.nodes[static_cast<size_t>(i)];
    const Cell c = cell_of(ni.pose.c);
    for (int64_t dx = -1; dx <= 1; ++dx)
      for (int64_t dy = -1; dy <= 1; ++dy) {
        auto it = grid.find({c.first + dx, c.second + dy});
        if (it == grid.end()) continue;
        for (int32_t j : it->second) {
          if (j <= i) continue;
          const auto& nj = g.nodes[static_cast<size_t>(j)];
          if (ni.entity_id == nj.entity_id && ni.is_crosswalk == nj.is_crosswalk) continue;
          if ((ni.pose.c - nj.pose.c).norm() < radius) {
            pairs.emplace(i, j);
            pairs.emplace(j, i);
          }
        }
      }
  }
  g.conflict.assign(pairs.begin(), pairs.end());
}

Tensor LaneGraph::feature_matrix() const {
  const int64_t n = node_count();
  Tensor f = Tensor::zeros({n, kFeatureWidth});
  std::vector<double> deg_succ(nodes.size()), deg_pred(nodes.size()), deg_left(nodes.size()),
      deg_right(nodes.size()), deg_conf(nodes.size());
  for (auto [i, j] : successor[0]) deg_succ[static_cast<size_t>(i)] += 1.0;
  for (auto [i, j] : predecessor[0]) deg_pred[static_cast<size_t>(i)] += 1.0;
  for (auto [i, j] : left) deg_left[static_cast<size_t>(i)] += 1.0;
  for (auto [i, j] : right) deg_right[static_cast<size_t>(i)] += 1.0;
  for (auto [i, j] : conflict) deg_conf[static_cast<size_t>(i)] += 1.0;

  for (int64_t i = 0; i < n; ++i) {
    const auto& nd = nodes[static_cast<size_t>(i)];
    int64_t c = 0;
    f.set(i, c++, nd.length);
    f.set(i, c++, nd.width);
    f.set(i, c++, nd.curvature);
    f.set(i, c++, nd.speed_limit);
    auto one_hot_boundary = [&](const Boundary& b) {
      // crosswalk nodes keep every lane slot zero-filled
      if (!nd.is_crosswalk) {
        f.set(i, c + static_cast<int64_t>(b.type), 1.0);
        f.set(i, c + 4 + static_cast<int64_t>(b.color), 1.0);
      }
      c += 7;
    };
    one_hot_boundary(nd.left_boundary);
    one_hot_boundary(nd.right_boundary);
    f.set(i, c++, nd.left_dist);
    f.set(i, c++, nd.right_dist);
    f.set(i, c++, nd.in_intersection ? 1.0 : 0.0);
    f.set(i, c++, nd.is_crosswalk ? 1.0 : 0.0);
    f.set(i, c++, deg_succ[static_cast<size_t>(i)]);
    f.set(i, c++, deg_pred[static_cast<size_t>(i)]);
    f.set(i, c++, deg_left[static_cast<size_t>(i)]);
    f.set(i, c++, deg_right[static_cast<size_t>(i)]);
    f.set(i, c++, deg_conf[static_cast<size_t>(i)]);
  }
  return f;
}

uint64_t LaneGraph::content_hash() const {
  std::vector<uint8_t> buf;
  auto push_d = [&buf](double v) {
    uint8_t b[8];
    std::memcpy(b, &v, 8);
    buf.insert(buf.end(), b, b + 8);
  };
  auto push_i = [&buf](int64_t v) {
    uint8_t b[8];
    std::memcpy(b, &v, 8);
    buf.insert(buf.end(), b, b + 8);
  };
  push_i(node_count());
  for (const auto& n : nodes) {
    push_d(n.pose.c.x);
    push_d(n.pose.c.y);
    push_d(n.pose.h.x);
    push_d(n.pose.h.y);
    push_d(n.length);
    push_d(n.width);
    push_d(n.curvature);
    push_d(n.speed_limit);
    push_i(n.entity_id * 2 + (n.is_crosswalk ? 1 : 0));
  }
  auto push_edges = [&](const std::vector<std::pair<int32_t, int32_t>>& es) {
    push_i(static_cast<int64_t>(es.size()));
    for (auto [i, j] : es)
      push_i((static_cast<int64_t>(i) << 32) | static_cast<uint32_t>(j));
  };
  for (const auto& es : successor) push_edges(es);
  for (const auto& es : predecessor) push_edges(es);
  push_edges(left);
  push_edges(right);
  push_edges(conflict);
  return fnv1a64(buf);
}

// ---- JSON-lines map format ----

const char* boundary_type_name(BoundaryType t) {
  switch (t) {
    case BoundaryType::solid: return "solid";
    case BoundaryType::dashed: return "dashed";
    case BoundaryType::double_line: return "double";
    default: return "none";
  }
}
const char* boundary_color_name(BoundaryColor c) {
  switch (c) {
    case BoundaryColor::white: return "white";
    case BoundaryColor::yellow: return "yellow";
    default: return "none";
  }
}
BoundaryType boundary_type_from(const std::string& s) {
  if (s == "solid") return BoundaryType::solid;
  if (s == "dashed") return BoundaryType::dashed;
  if (s == "double") return BoundaryType::double_line;
  if (s == "none") return BoundaryType::none;
  throw std::invalid_argument("unknown boundary type: " + s);
}
BoundaryColor boundary_color_from(const std::string& s) {
  if (s == "white") return BoundaryColor::white;
  if (s == "yellow") return BoundaryColor::yellow;
  if (s == "none") return BoundaryColor::none;
  throw std::invalid_argument("unknown boundary color: " + s);
}

namespace detail {

using nlohmann::json;

json polyline_json(const std::vector<Vec2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

std::vector<Vec2> polyline_from_json(const json& arr) {
  std::vector<Vec2> out;
  for (const auto& p : arr) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

json lane_to_json(const LaneSpec& lane) {
  json j;
  j["type"] = "lane";
  j["id"] = lane.id;
  j["centerline"] = polyline_json(lane.centerline);
  j["width"] = lane.width;
  j["speed_limit"] = lane.speed_limit;
  j["left_boundary"] = {{"type", boundary_type_name(lane.left_boundary.type)},
                        {"color", boundary_color_name(lane.left_boundary.color)}};
  j["right_boundary"] = {{"type", boundary_type_name(lane.right_boundary.type)},
                         {"color", boundary_color_name(lane.right_boundary.color)}};
  j["in_intersection"] = lane.in_intersection;
  j["successors"] = lane.successors;
  j["predecessors"] = lane.predecessors;
  j["left_neighbor"] = lane.left_neighbor ? json(*lane.left_neighbor) : json(nullptr);
  j["right_neighbor"] = lane.right_neighbor ? json(*lane.right_neighbor) : json(nullptr);
  return j;
}

LaneSpec lane_from_json(const json& j) {
  LaneSpec lane;
  lane.id = j.at("id").get<int64_t>();
  lane.centerline = polyline_from_json(j.at("centerline"));
  lane.width = j.at("width").get<double>();
  lane.speed_limit = j.at("speed_limit").get<double>();
  lane.left_boundary = {boundary_type_from(j.at("left_boundary").at("type")),
                        boundary_color_from(j.at("left_boundary").at("color"))};
  lane.right_boundary = {boundary_type_from(j.at("right_boundary").at("type")),
                         boundary_color_from(j.at("right_boundary").at("color"))};
  lane.in_intersection = j.at("in_intersection").get<bool>();
  lane.successors = j.at("successors").get<std::vector<int64_t>>();
  lane.predecessors = j.at("predecessors").get<std::vector<int64_t>>();
  if (!j.at("left_neighbor").is_null())
    lane.left_neighbor = j.at("left_neighbor").get<int64_t>();
  if (!j.at("right_neighbor").is_null())
    lane.right_neighbor = j.at("right_neighbor").get<int64_t>();
  return lane;
}

json crosswalk_to_json(const CrosswalkSpec& cw) {
  json j;
  j["type"] = "crosswalk";
  j["id"] = cw.id;
  j["polygon"] = polyline_json(cw.polygon);
  return j;
}

CrosswalkSpec crosswalk_from_json(const json& j) {
  CrosswalkSpec cw;
  cw.id = j.at("id").get<int64_t>();
  cw.polygon = polyline_from_json(j.at("polygon"));
  return cw;
}

}  // namespace detail

using nlohmann::json;

MapSource map_from_json_lines(const std::vector<std::string>& lines) {
  MapSource map;
  size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("map parse error at line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "lane") {
      map.lanes.push_back(detail::lane_from_json(j));
    } else if (type == "crosswalk") {
      map.crosswalks.push_back(detail::crosswalk_from_json(j));
    } else {
      throw std::runtime_error("map parse error at line " + std::to_string(line_no) +
                               ": unknown entity type " + type);
    }
  }
  return map;
}

MapSource read_map_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open map file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return map_from_json_lines(lines);
}

void write_map_jsonl(const std::string& path, const MapSource& map) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open map file for writing: " + path);
  for (const auto& lane : map.lanes) os << detail::lane_to_json(lane).dump() << '\n';
  for (const auto& cw : map.crosswalks) os << detail::crosswalk_to_json(cw).dump() << '\n';
}

}  // namespace relcast
