#include "relcast/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

namespace relcast {

ForecastSet constant_velocity_forecast(const Scenario& s, int horizon, double future_hz) {
  ForecastSet out;
  out.reserve(s.agents.size());
  for (const auto& agent : s.agents) {
    const Pose2& p0 = agent.current_pose();
    const double v = agent.history.back().speed;
    ForecastMode mode;
    mode.prob = 1.0;
    for (int t = 1; t <= horizon; ++t) {
      const double dist = v * static_cast<double>(t) / future_hz;
      mode.waypoints.push_back(p0.c + p0.h * dist);
    }
    mode.goal = mode.waypoints.back();
    out.push_back({agent.id, {std::move(mode)}});
  }
  return out;
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  const int64_t n_threads =
      std::min<int64_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (n_threads <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::atomic<int64_t> next{0};
  for (int64_t t = 0; t < n_threads; ++t)
    threads.emplace_back([&]() {
      for (int64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : threads) th.join();
}

MetricValues evaluate_model(const Model& m, const std::vector<Scenario>& scenarios) {
  std::vector<MetricValues> rows(scenarios.size());
  parallel_for(static_cast<int64_t>(scenarios.size()), [&](int64_t i) {
    rows[static_cast<size_t>(i)] =
        scenario_metrics(forecast(m, scenarios[static_cast<size_t>(i)]),
                         scenarios[static_cast<size_t>(i)]);
  });
  return aggregate(rows);
}

namespace {

Vec2 scenario_bbox_center(const Scenario& s) {
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  auto take = [&](const Vec2& p) {
    lo_x = std::min(lo_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_x = std::max(hi_x, p.x);
    hi_y = std::max(hi_y, p.y);
  };
  for (const auto& lane : s.map.lanes)
    for (const auto& p : lane.centerline) take(p);
  for (const auto& cw : s.map.crosswalks)
    for (const auto& p : cw.polygon) take(p);
  return {0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y)};
}

Scenario rotate_about(const Scenario& s, double angle, const Vec2& pivot) {
  const Se2 to_origin = Se2::from_angle(0.0, {-pivot.x, -pivot.y});
  const Se2 rot = Se2::from_angle(angle);
  const Se2 back = Se2::from_angle(0.0, pivot);
  return transform(s, back.compose(rot.compose(to_origin)));
}

}  // namespace

ViewpointSweepResult viewpoint_sweep(const Model& m, const std::vector<Scenario>& scenarios,
                                     int n_buckets, uint64_t seed) {
  if (n_buckets < 1) throw std::invalid_argument("viewpoint_sweep: need buckets");
  ViewpointSweepResult result;
  result.buckets.resize(static_cast<size_t>(n_buckets));

  const double width = 2.0 * M_PI / n_buckets;
  for (int b = 0; b < n_buckets; ++b) {
    auto& bucket = result.buckets[static_cast<size_t>(b)];
    bucket.angle_lo = b * width;
    bucket.angle_hi = (b + 1) * width;

    std::vector<MetricValues> rows(scenarios.size());
    parallel_for(static_cast<int64_t>(scenarios.size()), [&](int64_t i) {
      // per-scenario angle drawn inside the bucket, deterministic in (seed, b, i)
      Rng rng(seed ^ (static_cast<uint64_t>(b) << 32) ^ static_cast<uint64_t>(i));
      const double angle = rng.uniform(bucket.angle_lo, bucket.angle_hi);
      const Scenario& orig = scenarios[static_cast<size_t>(i)];
      const Scenario rotated = rotate_about(orig, angle, scenario_bbox_center(orig));
      rows[static_cast<size_t>(i)] = scenario_metrics(forecast(m, rotated), rotated);
    });
    bucket.metrics = aggregate(rows);
  }

  double mean = 0.0;
  for (const auto& b : result.buckets) mean += b.metrics.brier_fde6;
  mean /= n_buckets;
  double var = 0.0;
  for (const auto& b : result.buckets) {
    const double d = b.metrics.brier_fde6 - mean;
    var += d * d;
  }
  result.mean_brier_fde6 = mean;
  result.variance_brier_fde6 = var / n_buckets;
  return result;
}

void write_sweep_csv(const std::string& path, const ViewpointSweepResult& r) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open sweep csv: " + path);
  os.precision(17);
  os << "bucket,angle_lo_deg,angle_hi_deg," << metrics_csv_header() << "\n";
  for (size_t b = 0; b < r.buckets.size(); ++b)
    os << b << ',' << r.buckets[b].angle_lo * 180.0 / M_PI << ','
       << r.buckets[b].angle_hi * 180.0 / M_PI << ',' << metrics_csv_row(r.buckets[b].metrics)
       << "\n";
  os << "# mean_brier_fde6," << r.mean_brier_fde6 << "\n";
  os << "# variance_brier_fde6," << r.variance_brier_fde6 << "\n";
}

namespace {

/// Bench scene: multi-lane straight road sized for ~n_nodes lane-graph nodes
/// at the urban interval, agents spread along it. Highway-style short
/// histories keep the history encoder from dominating.
Scenario bench_scene(int n_agents, int n_nodes, uint64_t seed) {
  Rng rng(seed);
  Scenario s;
  s.domain = "highway";
  const Domain domain = Domain::highway();
  const int n_lanes = 5;
  const double interval = domain.sample_interval;
  const double length = std::max(3.0 * interval, interval * n_nodes / n_lanes);
  for (int i = 0; i < n_lanes; ++i) {
    LaneSpec lane;
    lane.id = i + 1;
    for (int k = 0; k <= 40; ++k)
      lane.centerline.push_back({length * k / 40.0, i * 3.6});
    lane.width = 3.6;
    lane.speed_limit = 30.0;
    if (i + 1 < n_lanes) lane.left_neighbor = i + 2;
    if (i > 0) lane.right_neighbor = i;
    s.map.lanes.push_back(std::move(lane));
  }
  const int hist = domain.history_len();
  for (int a = 0; a < n_agents; ++a) {
    AgentTrack t;
    t.id = a;
    t.cls = AgentClass::vehicle;
    const double lane_y = 3.6 * static_cast<double>(rng.below(n_lanes));
    const double x0 = rng.uniform(5.0, length - 5.0);
    const double v = rng.uniform(15.0, 28.0);
    for (int i = 0; i < hist; ++i) {
      const double t_rel = (i - (hist - 1)) * 0.1;
      t.history.push_back({Pose2{{x0 + v * t_rel, lane_y}, {1, 0}}, v, true});
    }
    for (int k = 1; k <= domain.future_len(); ++k)
      t.future.push_back({x0 + v * k / domain.future_hz, lane_y});
    s.agents.push_back(std::move(t));
  }
  return s;
}

struct EncodeOutput {
  Tensor agents;
  Tensor map;
};

EncodeOutput encode_shared(const Model& m, const Scenario& s, const LaneGraph& g) {
  ad::NoGradGuard inference;
  ad::Var map_emb = encode_lane_graph(m, g);
  ad::Var agent_emb = encode_history(m, s.agents);
  HeteroGraph scene_graph = assemble_scene_graph(m, s.agents, g, agent_emb, map_emb);
  SceneEmbedding scene = encode_scene(m, scene_graph);
  return {scene.agents.value(), scene.map.value()};
}

/// The per-agent baseline: the full scene is re-encoded once per target
/// agent (what a non-invariant model must do), keeping that agent's row.
EncodeOutput encode_per_agent(const Model& m, const Scenario& s, const LaneGraph& g) {
  ad::NoGradGuard inference;
  Tensor agents = Tensor::zeros({static_cast<int64_t>(s.agents.size()), m.cfg.hidden},
                                m.cfg.dtype);
  Tensor map;
  for (size_t a = 0; a < s.agents.size(); ++a) {
    ad::Var map_emb = encode_lane_graph(m, g);
    ad::Var agent_emb = encode_history(m, s.agents);
    HeteroGraph scene_graph = assemble_scene_graph(m, s.agents, g, agent_emb, map_emb);
    SceneEmbedding scene = encode_scene(m, scene_graph);
    for (int64_t c = 0; c < m.cfg.hidden; ++c)
      agents.set(static_cast<int64_t>(a), c, scene.agents.value().at(static_cast<int64_t>(a), c));
    if (a == 0) map = scene.map.value();
  }
  return {agents, map};
}

double time_median_ms(const std::function<void()>& fn, int trials) {
  std::vector<double> times;
  times.reserve(static_cast<size_t>(trials));
  fn();  // warmup
  for (int i = 0; i < trials; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

}  // namespace

RuntimeBenchResult runtime_bench(const Model& m, const std::vector<int>& agent_counts,
                                 const std::vector<int>& node_counts, int fixed_nodes,
                                 int fixed_agents, int trials, uint64_t seed) {
  RuntimeBenchResult result;

  // numerical equivalence gate before any timing
  {
    Scenario s = bench_scene(4, 60, seed);
    LaneGraph g = build_lane_graph(s.map, Domain::highway().sample_interval);
    add_conflict_edges(g, m.cfg.conflict_radius);
    const EncodeOutput shared = encode_shared(m, s, g);
    const EncodeOutput per_agent = encode_per_agent(m, s, g);
    double gap = 0.0;
    for (int64_t i = 0; i < shared.agents.size(); ++i)
      gap = std::max(gap, std::abs(shared.agents.at(i) - per_agent.agents.at(i)));
    for (int64_t i = 0; i < shared.map.size(); ++i)
      gap = std::max(gap, std::abs(shared.map.at(i) - per_agent.map.at(i)));
    result.equivalence_gap = gap;
    if (gap > 1e-9)
      throw std::runtime_error("runtime_bench: shared and per-agent encodings disagree");
  }

  auto bench_point = [&](int n_agents, int n_nodes) {
    Scenario s = bench_scene(n_agents, n_nodes, seed + 1);
    LaneGraph g = build_lane_graph(s.map, Domain::highway().sample_interval);
    add_conflict_edges(g, m.cfg.conflict_radius);
    RuntimeBenchRow row;
    row.n_agents = n_agents;
    row.n_map_nodes = static_cast<int>(g.node_count());
    row.shared_ms = time_median_ms([&]() { encode_shared(m, s, g); }, trials);
    row.per_agent_ms = time_median_ms([&]() { encode_per_agent(m, s, g); }, trials);
    return row;
  };

  for (int a : agent_counts) result.agent_sweep.push_back(bench_point(a, fixed_nodes));
  for (int n : node_counts) result.node_sweep.push_back(bench_point(fixed_agents, n));
  return result;
}

void write_bench_csv(const std::string& path, const RuntimeBenchResult& r) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open bench csv: " + path);
  os.precision(17);
  os << "sweep,n_agents,n_map_nodes,shared_ms,per_agent_ms,shared_rel,per_agent_rel\n";
  auto dump = [&os](const char* name, const std::vector<RuntimeBenchRow>& rows) {
    if (rows.empty()) return;
    const double base_shared = rows.front().shared_ms;
    const double base_per = rows.front().per_agent_ms;
    for (const auto& row : rows)
      os << name << ',' << row.n_agents << ',' << row.n_map_nodes << ',' << row.shared_ms
         << ',' << row.per_agent_ms << ',' << row.shared_ms / base_shared << ','
         << row.per_agent_ms / base_per << "\n";
  };
  dump("agents", r.agent_sweep);
  dump("nodes", r.node_sweep);
  os << "# equivalence_gap," << r.equivalence_gap << "\n";
}

std::vector<SampleEfficiencyRow> sample_efficiency(
    const ModelConfig& base_cfg, const TrainConfig& train_cfg,
    const std::vector<Scenario>& train_set, const std::vector<Scenario>& holdout,
    const std::vector<double>& fractions, const std::string& work_dir) {
  std::vector<SampleEfficiencyRow> rows;
  for (bool pairpose : {true, false}) {
    for (double frac : fractions) {
      if (frac <= 0.0 || frac > 1.0)
        throw std::invalid_argument("sample_efficiency: fraction must be in (0, 1]");
      const int n =
          std::max<int>(1, static_cast<int>(std::llround(frac * train_set.size())));
      std::vector<Scenario> subset(train_set.begin(), train_set.begin() + n);
      ModelConfig cfg = base_cfg;
      cfg.use_pairpose = pairpose;
      Model model(cfg);
      const std::string ckpt = work_dir + "/eff_" + (pairpose ? "pairpose" : "global") + "_" +
                               std::to_string(n) + ".ckpt";
      train(model, subset, {}, train_cfg, ckpt);
      SampleEfficiencyRow row;
      row.fraction = frac;
      row.n_train = n;
      row.pairpose = pairpose;
      row.metrics = evaluate_model(model, holdout);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_efficiency_csv(const std::string& path,
                          const std::vector<SampleEfficiencyRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open efficiency csv: " + path);
  os.precision(17);
  os << "variant,fraction,n_train," << metrics_csv_header() << "\n";
  for (const auto& row : rows)
    os << (row.pairpose ? "pairpose" : "global_frame") << ',' << row.fraction << ','
       << row.n_train << ',' << metrics_csv_row(row.metrics) << "\n";
}

}  // namespace relcast
