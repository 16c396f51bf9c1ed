#include "relcast/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

#include "relcast/rng.hpp"

namespace relcast {

const char* map_template_name(MapTemplateKind k) {
  switch (k) {
    case MapTemplateKind::straight: return "straight";
    case MapTemplateKind::curve: return "curve";
    case MapTemplateKind::fork: return "fork";
    case MapTemplateKind::merge: return "merge";
    case MapTemplateKind::intersection: return "intersection";
    default: return "crosswalk_street";
  }
}

MapTemplateKind map_template_from(const std::string& s) {
  if (s == "straight") return MapTemplateKind::straight;
  if (s == "curve") return MapTemplateKind::curve;
  if (s == "fork") return MapTemplateKind::fork;
  if (s == "merge") return MapTemplateKind::merge;
  if (s == "intersection") return MapTemplateKind::intersection;
  if (s == "crosswalk_street") return MapTemplateKind::crosswalk_street;
  throw std::invalid_argument("unknown map template: " + s);
}

namespace {

std::vector<Vec2> line_points(Vec2 a, Vec2 b, int n = 9) {
  std::vector<Vec2> out;
  for (int i = 0; i <= n; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / n));
  return out;
}

/// Arc starting at `start` with initial heading `theta0`, turning by
/// `sweep` radians (positive = left) at radius r.
std::vector<Vec2> arc_points(Vec2 start, double theta0, double sweep, double r, int n = 16) {
  std::vector<Vec2> out;
  const double sign = sweep >= 0.0 ? 1.0 : -1.0;
  const Vec2 center{start.x - sign * r * std::sin(theta0),
                    start.y + sign * r * std::cos(theta0)};
  for (int i = 0; i <= n; ++i) {
    const double phi = sweep * i / n;
    const double ang = theta0 - sign * M_PI / 2.0 + phi;
    out.push_back({center.x + r * std::cos(ang), center.y + r * std::sin(ang)});
  }
  return out;
}

LaneSpec make_lane(int64_t id, std::vector<Vec2> pts, double width, double speed) {
  LaneSpec lane;
  lane.id = id;
  lane.centerline = std::move(pts);
  lane.width = width;
  lane.speed_limit = speed;
  lane.left_boundary = {BoundaryType::dashed, BoundaryColor::white};
  lane.right_boundary = {BoundaryType::solid, BoundaryColor::white};
  return lane;
}

MapSource build_template(const MapTemplateParams& tpl, double speed_limit, Rng& rng) {
  MapSource map;
  const double w = tpl.lane_width;
  const double len = tpl.lane_length;

  switch (tpl.kind) {
    case MapTemplateKind::straight: {
      for (int i = 0; i < tpl.n_lanes; ++i) {
        auto lane = make_lane(i + 1, line_points({0, i * w}, {len, i * w}), w, speed_limit);
        if (i + 1 < tpl.n_lanes) lane.left_neighbor = i + 2;
        if (i > 0) lane.right_neighbor = i;
        map.lanes.push_back(std::move(lane));
      }
      break;
    }
    case MapTemplateKind::curve: {
      const double sweep = rng.uniform(0.9, 1.5) * (rng.chance(0.5) ? 1.0 : -1.0);
      for (int i = 0; i < tpl.n_lanes; ++i) {
        const double r = tpl.curve_radius + (sweep > 0 ? -1.0 : 1.0) * i * w;
        auto lane =
            make_lane(i + 1, arc_points({0, i * w}, 0.0, sweep, r, 24), w, speed_limit);
        if (i + 1 < tpl.n_lanes) lane.left_neighbor = i + 2;
        if (i > 0) lane.right_neighbor = i;
        map.lanes.push_back(std::move(lane));
      }
      break;
    }
    case MapTemplateKind::fork: {
      const double approach = 0.6 * len;
      auto in = make_lane(1, line_points({-approach, 0}, {0, 0}), w, speed_limit);
      in.successors = {2, 3};
      auto straight = make_lane(2, line_points({0, 0}, {len, 0}), w, speed_limit);
      const double sweep = rng.uniform(0.5, 0.8);
      auto branch = make_lane(3, arc_points({0, 0}, 0.0, sweep, tpl.curve_radius, 20), w,
                              speed_limit * 0.8);
      map.lanes.push_back(std::move(in));
      map.lanes.push_back(std::move(straight));
      map.lanes.push_back(std::move(branch));
      break;
    }
    case MapTemplateKind::merge: {
      auto out = make_lane(1, line_points({0, 0}, {len, 0}), w, speed_limit);
      auto main_in = make_lane(2, line_points({-0.7 * len, 0}, {0, 0}), w, speed_limit);
      main_in.successors = {1};
      // on-ramp sweeping right-to-left into the main lane
      auto ramp_pts = arc_points({0, 0}, 0.0, -0.5, tpl.curve_radius, 16);
      std::reverse(ramp_pts.begin(), ramp_pts.end());
      for (auto& p : ramp_pts) p = Vec2{-p.x, p.y};  // approach from the left of the junction
      auto ramp = make_lane(3, std::move(ramp_pts), w, speed_limit * 0.8);
      ramp.successors = {1};
      map.lanes.push_back(std::move(out));
      map.lanes.push_back(std::move(main_in));
      map.lanes.push_back(std::move(ramp));
      break;
    }
    case MapTemplateKind::intersection: {
      // four arms around a box of half-size `box`; each inbound arm gets a
      // straight, left and right connector to the matching outbound arms
      const double box = 10.0;
      const double arm = std::max(25.0, 0.5 * len);
      struct Arm {
        double theta;  // direction of travel into the intersection
        int64_t in_id, out_id;
      };
      std::vector<Arm> arms;
      for (int k = 0; k < 4; ++k) {
        const double theta = k * M_PI / 2.0;
        arms.push_back({theta, 10 + k, 20 + k});
      }
      auto dir = [](double th) { return Vec2{std::cos(th), std::sin(th)}; };
      for (const auto& a : arms) {
        const Vec2 d = dir(a.theta);
        const Vec2 lat = d.perp();
        // inbound: offset to the right of travel; outbound mirrored
        const Vec2 in_far = d * -(box + arm) + lat * (-0.5 * w);
        const Vec2 in_near = d * -box + lat * (-0.5 * w);
        map.lanes.push_back(make_lane(a.in_id, line_points(in_far, in_near), w, speed_limit));
        const Vec2 out_near = d * box + lat * (-0.5 * w);
        const Vec2 out_far = d * (box + arm) + lat * (-0.5 * w);
        map.lanes.push_back(make_lane(a.out_id, line_points(out_near, out_far), w, speed_limit));
      }
      int64_t next_id = 40;
      std::vector<LaneSpec> connectors;
      for (int k = 0; k < 4; ++k) {
        const size_t in_idx = static_cast<size_t>(2 * k);
        const Vec2 from = map.lanes[in_idx].centerline.back();
        const double theta = arms[static_cast<size_t>(k)].theta;
        struct Turn {
          int to_arm;
          double sweep;
        };
        // straight, left turn, right turn
        for (const Turn& t :
             {Turn{(k + 2) % 4, 0.0}, Turn{(k + 1) % 4, M_PI / 2}, Turn{(k + 3) % 4, -M_PI / 2}}) {
          const auto& target = map.lanes[static_cast<size_t>(2 * t.to_arm + 1)];
          std::vector<Vec2> pts;
          if (t.sweep == 0.0) {
            pts = line_points(from, target.centerline.front(), 7);
          } else {
            const double r = (from - target.centerline.front()).norm() / std::sqrt(2.0);
            pts = arc_points(from, theta, t.sweep, std::max(4.0, r), 10);
            pts.back() = target.centerline.front();
          }
          auto conn =
              make_lane(next_id, std::move(pts), w, speed_limit * (t.sweep == 0 ? 1.0 : 0.6));
          conn.in_intersection = true;
          conn.successors = {target.id};
          map.lanes[in_idx].successors.push_back(conn.id);
          connectors.push_back(std::move(conn));
          ++next_id;
        }
      }
      for (auto& conn : connectors) map.lanes.push_back(std::move(conn));
      break;
    }
    case MapTemplateKind::crosswalk_street: {
      for (int i = 0; i < 2; ++i) {
        auto lane = make_lane(i + 1, line_points({0, i * w}, {len, i * w}), w, speed_limit);
        if (i == 0) lane.left_neighbor = 2;
        if (i == 1) lane.right_neighbor = 1;
        map.lanes.push_back(std::move(lane));
      }
      const double cx = 0.5 * len;
      CrosswalkSpec cw;
      cw.id = 100;
      cw.polygon = {{cx - 2.0, -0.5 * w - 2.0},
                    {cx + 2.0, -0.5 * w - 2.0},
                    {cx + 2.0, 1.5 * w + 2.0},
                    {cx - 2.0, 1.5 * w + 2.0}};
      map.crosswalks.push_back(cw);
      break;
    }
  }
  return map;
}

struct LanePath {
  std::vector<Vec2> points;
  std::vector<int64_t> lane_ids;
};

const LaneSpec& lane_by_id(const MapSource& map, int64_t id) {
  for (const auto& lane : map.lanes)
    if (lane.id == id) return lane;
  throw std::logic_error("generator: missing lane id");
}

/// Walks successors from `start_id`, choosing branches with the fork prior,
/// until the path is at least `min_length` long or a dead end.
LanePath build_path(const MapSource& map, int64_t start_id, double min_length,
                    double fork_prior, Rng& rng) {
  LanePath path;
  int64_t id = start_id;
  double length = 0.0;
  for (int hops = 0; hops < 12; ++hops) {
    const LaneSpec& lane = lane_by_id(map, id);
    const auto& pts = lane.centerline;
    const size_t skip = path.points.empty() ? 0 : 1;  // joints share a point
    path.points.insert(path.points.end(), pts.begin() + static_cast<long>(skip), pts.end());
    path.lane_ids.push_back(id);
    length += polyline_length(pts);
    if (length >= min_length || lane.successors.empty()) break;
    if (lane.successors.size() == 1) {
      id = lane.successors[0];
    } else {
      id = rng.chance(fork_prior) ? lane.successors[1] : lane.successors[0];
    }
  }
  return path;
}

struct Rollout {
  std::vector<double> arclength;  // per 10 Hz step
  std::vector<double> speed;
};

/// Speed-profile integration along a path: accelerate toward the curvature-
/// limited target, never approach the leader closer than the keep-gap.
Rollout roll(const LanePath& path, double s0, double v0, double cap, int steps, double dt,
             const Rollout* leader, double leader_offset) {
  constexpr double kMaxAccel = 2.0;
  constexpr double kMaxBrake = 4.0;
  constexpr double kLatAccel = 2.5;
  constexpr double kKeepGap = 4.0;
  constexpr double kHeadway = 1.0;
  const double total = polyline_length(path.points);
  Rollout r;
  double s = s0, v = v0;
  for (int i = 0; i < steps; ++i) {
    r.arclength.push_back(s);
    r.speed.push_back(v);
    const double kappa = std::abs(polyline_curvature(path.points, s + v * 0.8, 4.0));
    double target = std::min(cap, kappa > 1e-6 ? std::sqrt(kLatAccel / kappa) : cap);
    if (leader) {
      const double gap = (leader->arclength[static_cast<size_t>(i)] + leader_offset) - s;
      target = std::min(target, std::max(0.0, (gap - kKeepGap) / kHeadway));
    }
    v += std::clamp(target - v, -kMaxBrake * dt, kMaxAccel * dt);
    v = std::max(0.0, std::min(v, cap));
    s = std::min(s + v * dt, total - 1e-3);
  }
  return r;
}

Pose2 pose_on_path(const LanePath& path, double s) {
  const double total = polyline_length(path.points);
  const double h = 0.5;
  const Vec2 p = polyline_point_at(path.points, s);
  const Vec2 a = polyline_point_at(path.points, std::max(0.0, s - h));
  const Vec2 b = polyline_point_at(path.points, std::min(total, s + h));
  const Vec2 t = b - a;
  return {p, t.norm() > 1e-9 ? t.normalized() : Vec2{1, 0}};
}

}  // namespace

Scenario generate(const MapTemplateParams& tpl, const Domain& domain, int n_agents,
                  const BehaviorMix& mix, uint64_t seed) {
  if (n_agents < 1) throw std::invalid_argument("generate: need at least one agent");
  Rng rng(seed);
  Scenario s;
  s.id = static_cast<int64_t>(seed);
  s.domain = domain.name;

  const double speed_limit = domain.speed_cap * 0.9;
  s.map = build_template(tpl, speed_limit, rng);

  const double dt = 1.0 / domain.history_hz;
  const int hist_steps = domain.history_len();
  const int fut_steps_10hz = static_cast<int>(domain.future_sec * domain.history_hz + 0.5);
  const int total_steps = hist_steps + fut_steps_10hz;
  const int fut_subsample = static_cast<int>(domain.history_hz / domain.future_hz + 0.5);

  // choose start lanes; the same lane twice produces a car-following pair
  std::vector<int64_t> start_lane_ids;
  for (const auto& lane : s.map.lanes)
    if (lane.predecessors.empty() && !lane.in_intersection &&
        polyline_length(lane.centerline) > 20.0) {
      bool is_exit = false;
      for (const auto& other : s.map.lanes)
        for (int64_t succ : other.successors) is_exit = is_exit || succ == lane.id;
      if (!is_exit) start_lane_ids.push_back(lane.id);
    }
  if (start_lane_ids.empty()) start_lane_ids.push_back(s.map.lanes.front().id);
  if (n_agents > 2 + 4 * static_cast<int>(start_lane_ids.size()))
    throw std::invalid_argument("generate: infeasible placement, too many agents for map");

  const bool has_crosswalk = !s.map.crosswalks.empty();
  std::map<int64_t, std::pair<const Rollout*, double>> last_on_lane;  // car following
  std::vector<std::unique_ptr<Rollout>> rollouts;

  int placed = 0;
  for (int a = 0; a < n_agents; ++a) {
    const bool pedestrian = has_crosswalk && a > 0 && rng.chance(0.4);
    AgentTrack track;
    track.id = a;

    if (pedestrian) {
      track.cls = AgentClass::pedestrian;
      track.length = 0.6;
      track.width = 0.6;
      const auto& cw = s.map.crosswalks.front();
      const double cx = 0.5 * (cw.polygon[0].x + cw.polygon[1].x);
      const double y0 = cw.polygon[0].y, y1 = cw.polygon[2].y;
      const bool up = rng.chance(0.5);
      const double walk_speed = rng.uniform(1.0, 1.6);
      const Vec2 start{cx + rng.uniform(-1.0, 1.0), up ? y0 : y1};
      const Vec2 heading{0.0, up ? 1.0 : -1.0};
      for (int i = 0; i < total_steps; ++i) {
        const double t = (i - (hist_steps - 1)) * dt;
        Vec2 pos = start + heading * (walk_speed * (t + domain.history_sec));
        pos.y = std::clamp(pos.y, std::min(y0, y1), std::max(y0, y1));
        if (i < hist_steps)
          track.history.push_back({Pose2{pos, heading}, walk_speed, true});
        else if ((i - hist_steps + 1) % fut_subsample == 0)
          track.future.push_back(pos);
      }
      s.agents.push_back(std::move(track));
      ++placed;
      continue;
    }

    track.cls = rng.chance(0.1) ? AgentClass::motorcycle : AgentClass::vehicle;
    track.length = track.cls == AgentClass::motorcycle ? 2.2 : rng.uniform(4.2, 5.2);
    track.width = track.cls == AgentClass::motorcycle ? 0.9 : rng.uniform(1.8, 2.1);

    const int64_t lane_id =
        start_lane_ids[static_cast<size_t>(rng.below(start_lane_ids.size()))];
    const double v0 = rng.uniform(0.35, 0.85) * speed_limit;
    LanePath path = build_path(s.map, lane_id,
                               (domain.history_sec + domain.future_sec) * speed_limit + 30.0,
                               mix.fork_left_prior, rng);
    const double total = polyline_length(path.points);
    const double need = v0 * (domain.history_sec + domain.future_sec);
    if (total < need * 0.4) {
      if (placed == 0 && a == n_agents - 1)
        throw std::runtime_error("generate: could not place any agent on this map");
      continue;
    }

    // keep a spawn gap behind an agent already on this lane
    const Rollout* leader = nullptr;
    double leader_offset = 0.0, s0 = std::min(0.25 * total, 10.0) + rng.uniform(0.0, 6.0);
    auto it = last_on_lane.find(lane_id);
    if (it != last_on_lane.end()) {
      leader = it->second.first;
      leader_offset = it->second.second;
      s0 = std::max(0.0, leader->arclength.front() + leader_offset - rng.uniform(12.0, 20.0));
    }

    auto rollout = std::make_unique<Rollout>(
        roll(path, s0, v0, speed_limit, total_steps, dt, leader, leader_offset));

    const int appear_at =
        rng.chance(mix.late_appear_frac) ? static_cast<int>(rng.below(hist_steps / 2)) : 0;
    int future_len = fut_steps_10hz / fut_subsample;
    if (rng.chance(mix.truncate_frac))
      future_len = static_cast<int>(rng.below(static_cast<uint64_t>(future_len)));

    for (int i = 0; i < hist_steps; ++i) {
      AgentState st;
      st.observed = i >= appear_at;
      st.pose = pose_on_path(path, rollout->arclength[static_cast<size_t>(i)]);
      st.speed = rollout->speed[static_cast<size_t>(i)];
      if (!st.observed) {
        st.pose = Pose2{};
        st.speed = 0.0;
      }
      track.history.push_back(st);
    }
    int emitted = 0;
    for (int i = hist_steps; i < total_steps && emitted < future_len; ++i) {
      if ((i - hist_steps + 1) % fut_subsample != 0) continue;
      track.future.push_back(
          pose_on_path(path, rollout->arclength[static_cast<size_t>(i)]).c);
      ++emitted;
    }

    last_on_lane[lane_id] = {rollout.get(), s0 - rollout->arclength.front()};
    rollouts.push_back(std::move(rollout));
    s.agents.push_back(std::move(track));
    ++placed;
  }
  if (placed == 0) throw std::runtime_error("generate: could not place any agent");

  // arbitrary global frame: the scene itself carries no canonical viewpoint
  const Se2 frame = Se2::from_angle(rng.uniform(0.0, 2.0 * M_PI),
                                    {rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0)});
  return transform(s, frame);
}

std::vector<Scenario> generate_dataset(const std::vector<MapTemplateKind>& kinds,
                                       const Domain& domain, int count, int max_agents,
                                       const BehaviorMix& mix, uint64_t seed) {
  if (kinds.empty()) throw std::invalid_argument("generate_dataset: no template kinds");
  std::vector<Scenario> out;
  out.reserve(static_cast<size_t>(count));
  Rng meta(seed);
  for (int i = 0; i < count; ++i) {
    MapTemplateParams tpl;
    tpl.kind = kinds[static_cast<size_t>(i) % kinds.size()];
    tpl.lane_length = meta.uniform(55.0, 90.0);
    tpl.curve_radius = meta.uniform(35.0, 60.0);
    const int n_agents = 1 + static_cast<int>(meta.below(static_cast<uint64_t>(max_agents)));
    Scenario s = generate(tpl, domain, n_agents, mix, meta.next_u64());
    s.id = i;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace relcast
