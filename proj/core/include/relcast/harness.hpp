#pragma once

#include <functional>

#include "relcast/generator.hpp"
#include "relcast/training.hpp"

namespace relcast {

/// Constant-velocity baseline: every agent keeps its current speed and
/// heading; one mode with probability 1.
ForecastSet constant_velocity_forecast(const Scenario& s, int horizon, double future_hz);

/// Static-partition parallel loop with deterministic per-index outputs.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

/// Evaluates a model over scenarios (parallel across scenarios, aggregation
/// in index order).
MetricValues evaluate_model(const Model& m, const std::vector<Scenario>& scenarios);

struct ViewpointBucket {
  double angle_lo = 0.0, angle_hi = 0.0;  // radians
  MetricValues metrics;
};

struct ViewpointSweepResult {
  std::vector<ViewpointBucket> buckets;
  double mean_brier_fde6 = 0.0;
  double variance_brier_fde6 = 0.0;  // across buckets
};

/// Rotates every scenario by a uniform angle inside each of `n_buckets`
/// rotation bins (pivot: scenario bounding-box center) and evaluates per
/// bucket. A viewpoint-invariant model shows only float noise across
/// buckets.
ViewpointSweepResult viewpoint_sweep(const Model& m, const std::vector<Scenario>& scenarios,
                                     int n_buckets = 8, uint64_t seed = 7);

void write_sweep_csv(const std::string& path, const ViewpointSweepResult& r);

struct RuntimeBenchRow {
  int n_agents = 0;
  int n_map_nodes = 0;
  double shared_ms = 0.0;     // one shared scene encoding
  double per_agent_ms = 0.0;  // scene re-encoded per agent
};

struct RuntimeBenchResult {
  std::vector<RuntimeBenchRow> agent_sweep;  // map size fixed
  std::vector<RuntimeBenchRow> node_sweep;   // agent count fixed
  double equivalence_gap = 0.0;  // max |shared - per-agent| embedding delta
};

/// Times the encoder (history + lane graph + scene encoder) in shared and
/// per-agent modes; medians over `trials` runs. Both modes are checked to
/// produce numerically identical embeddings before any timing.
RuntimeBenchResult runtime_bench(const Model& m, const std::vector<int>& agent_counts,
                                 const std::vector<int>& node_counts, int fixed_nodes,
                                 int fixed_agents, int trials, uint64_t seed);

void write_bench_csv(const std::string& path, const RuntimeBenchResult& r);

struct SampleEfficiencyRow {
  double fraction = 0.0;
  int n_train = 0;
  bool pairpose = true;
  MetricValues metrics;
};

/// Trains a fresh model per (fraction, variant) pair on a prefix of the
/// training set and evaluates the holdout; variants are the full model and
/// the global-frame ablation.
std::vector<SampleEfficiencyRow> sample_efficiency(
    const ModelConfig& base_cfg, const TrainConfig& train_cfg,
    const std::vector<Scenario>& train_set, const std::vector<Scenario>& holdout,
    const std::vector<double>& fractions, const std::string& work_dir);

void write_efficiency_csv(const std::string& path,
                          const std::vector<SampleEfficiencyRow>& rows);

}  // namespace relcast
