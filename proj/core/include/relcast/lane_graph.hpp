#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relcast/geometry.hpp"
#include "relcast/tensor.hpp"

namespace relcast {

enum class BoundaryType : uint8_t { solid = 0, dashed, double_line, none };
enum class BoundaryColor : uint8_t { white = 0, yellow, none };

struct Boundary {
  BoundaryType type = BoundaryType::none;
  BoundaryColor color = BoundaryColor::none;
};

struct LaneSpec {
  int64_t id = 0;
  std::vector<Vec2> centerline;  // >= 2 points, meters
  double width = 3.5;
  double speed_limit = 13.9;  // m/s
  Boundary left_boundary, right_boundary;
  bool in_intersection = false;
  std::vector<int64_t> successors, predecessors;
  std::optional<int64_t> left_neighbor, right_neighbor;
};

struct CrosswalkSpec {
  int64_t id = 0;
  std::vector<Vec2> polygon;  // closed implicitly, >= 3 points
};

struct MapSource {
  std::vector<LaneSpec> lanes;
  std::vector<CrosswalkSpec> crosswalks;
};

/// Arclength helpers for open polylines.
double polyline_length(const std::vector<Vec2>& pts);
Vec2 polyline_point_at(const std::vector<Vec2>& pts, double s);
/// Signed Menger curvature from points at s-half_span, s, s+half_span
/// (clamped to the polyline ends). Collinear or degenerate triples give 0;
/// positive means turning left.
double polyline_curvature(const std::vector<Vec2>& pts, double s, double half_span);

constexpr int kMaxDilation = 5;

struct LaneGraphNode {
  Pose2 pose;  // segment midpoint, heading along the chord
  int64_t entity_id = 0;
  bool is_crosswalk = false;
  double length = 0.0;
  double width = 0.0;
  double curvature = 0.0;
  double speed_limit = 0.0;
  Boundary left_boundary, right_boundary;
  double left_dist = 0.0, right_dist = 0.0;  // centerline to boundary
  bool in_intersection = false;
  double arclength_frac = 0.0;  // midpoint fraction within its entity
};

/// The sampled lane graph. Edge lists are directed (i -> j) node-index
/// pairs; successor/predecessor carry one list per dilation (index 0 is
/// dilation 1). Construction is deterministic: the same MapSource always
/// produces an identical graph.
struct LaneGraph {
  std::vector<LaneGraphNode> nodes;
  std::array<std::vector<std::pair<int32_t, int32_t>>, kMaxDilation> successor;
  std::array<std::vector<std::pair<int32_t, int32_t>>, kMaxDilation> predecessor;
  std::vector<std::pair<int32_t, int32_t>> left, right, conflict;

  int64_t node_count() const { return static_cast<int64_t>(nodes.size()); }
  /// Per-node features: length, width, curvature, speed limit, left/right
  /// boundary type+color one-hots, boundary distances, intersection and
  /// crosswalk flags, and per-edge-class out-degrees. Width 27.
  static constexpr int64_t kFeatureWidth = 27;
  Tensor feature_matrix() const;
  /// Hash over poses, features and edge structure; used for cache checks.
  uint64_t content_hash() const;
};

/// Resamples centerlines and crosswalk perimeters into graph nodes at
/// ~interval meters of arclength (short remainders merge into the last
/// segment) and wires successor/predecessor (with dilations 1..5) and
/// lateral edges. Conflict edges between crosswalk chain neighbors are
/// added here; proximity conflicts come from add_conflict_edges.
LaneGraph build_lane_graph(const MapSource& map, double interval);

/// Adds symmetric conflict edges between nodes of distinct entities closer
/// than radius (spatial hash, equivalent to the all-pairs rule).
void add_conflict_edges(LaneGraph& g, double radius = 2.5);

/// JSON-lines map I/O: one entity per line, "lane" or "crosswalk", meters
/// and m/s throughout.
MapSource read_map_jsonl(const std::string& path);
void write_map_jsonl(const std::string& path, const MapSource& map);
MapSource map_from_json_lines(const std::vector<std::string>& lines);

const char* boundary_type_name(BoundaryType t);
const char* boundary_color_name(BoundaryColor c);
BoundaryType boundary_type_from(const std::string& s);
BoundaryColor boundary_color_from(const std::string& s);

}  // namespace relcast
