#pragma once

#include "relcast/model.hpp"

namespace relcast {

/// Displacement metrics over K in {1, 6} plus along/cross-track endpoint
/// errors. The @1 mode is the highest-probability one; the "best" mode for
/// Brier terms is the FDE-argmin among the first K, and the Brier penalty is
/// (1 - p_best)^2. The miss-rate threshold is the 2.0 m convention.
struct MetricValues {
  double min_ade1 = 0, min_fde1 = 0, brier_fde1 = 0, mr1 = 0;
  double min_ade6 = 0, min_fde6 = 0, brier_fde6 = 0, mr6 = 0;
  double ate1 = 0, cte1 = 0, brier_ate6 = 0, brier_cte6 = 0;
  int64_t n_agents = 0;
};

struct AgentGroundTruth {
  std::vector<Vec2> waypoints;  // world frame, full horizon when scored
  Vec2 fallback_tangent{1, 0};  // agent heading at t=0, for stationary GT
  bool scored = true;
};

/// Metrics for one agent's forecast against its ground truth (n_agents = 1).
MetricValues agent_metrics(const AgentForecast& forecast, const AgentGroundTruth& gt);

/// Aggregate over agents (means; miss rates are fractions). Unscored agents
/// (short GT) are skipped.
MetricValues aggregate(const std::vector<MetricValues>& rows);

/// Pairs forecasts with scenario agents by position and evaluates the
/// scenario. Only agents with full-horizon GT count.
MetricValues scenario_metrics(const ForecastSet& forecasts, const Scenario& s);

AgentGroundTruth ground_truth_of(const AgentTrack& track, int horizon);

std::string metrics_to_json(const MetricValues& v);
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricValues& v);

}  // namespace relcast
