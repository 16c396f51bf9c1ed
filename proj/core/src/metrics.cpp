#include "relcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace relcast {

namespace {

double fde(const ForecastMode& mode, const std::vector<Vec2>& gt) {
  return (mode.waypoints.back() - gt.back()).norm();
}

double ade(const ForecastMode& mode, const std::vector<Vec2>& gt) {
  const size_t n = std::min(mode.waypoints.size(), gt.size());
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += (mode.waypoints[i] - gt[i]).norm();
  return acc / static_cast<double>(n);
}

}  // namespace

MetricValues agent_metrics(const AgentForecast& forecast, const AgentGroundTruth& gt) {
  if (forecast.modes.empty()) throw std::invalid_argument("agent_metrics: no modes");
  if (gt.waypoints.empty()) throw std::invalid_argument("agent_metrics: empty ground truth");
  for (const auto& mode : forecast.modes)
    if (mode.waypoints.size() != gt.waypoints.size())
      throw std::invalid_argument("agent_metrics: K/horizon mismatch with forecasts");

  // endpoint tangent from the backward difference, agent heading as fallback
  Vec2 tangent = gt.fallback_tangent;
  if (gt.waypoints.size() >= 2) {
    const Vec2 d = gt.waypoints.back() - gt.waypoints[gt.waypoints.size() - 2];
    if (d.norm() > 1e-12) tangent = d.normalized();
  }
  const Vec2 normal = tangent.perp();

  auto top_k = [&](size_t k) {
    // the @1 mode is the probability argmax (first on ties); @K takes the
    // K most probable modes in probability order
    std::vector<size_t> order(forecast.modes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return forecast.modes[a].prob > forecast.modes[b].prob;
    });
    order.resize(std::min(k, order.size()));
    return order;
  };

  auto eval_k = [&](size_t k, double& min_ade, double& min_fde, double& brier, double& mr,
                    double& ate_best, double& cte_best, double& p_best) {
    const auto idx = top_k(k);
    size_t best = idx[0];
    double best_fde = fde(forecast.modes[idx[0]], gt.waypoints);
    min_ade = ade(forecast.modes[idx[0]], gt.waypoints);
    for (size_t i = 1; i < idx.size(); ++i) {
      const double f = fde(forecast.modes[idx[i]], gt.waypoints);
      min_ade = std::min(min_ade, ade(forecast.modes[idx[i]], gt.waypoints));
      if (f < best_fde) {
        best_fde = f;
        best = idx[i];
      }
    }
    min_fde = best_fde;
    p_best = forecast.modes[best].prob;
    brier = min_fde + (1.0 - p_best) * (1.0 - p_best);
    mr = min_fde > 2.0 ? 1.0 : 0.0;
    const Vec2 err = forecast.modes[best].waypoints.back() - gt.waypoints.back();
    ate_best = std::abs(err.dot(tangent));
    cte_best = std::abs(err.dot(normal));
  };

  MetricValues v;
  v.n_agents = 1;
  double ate6_best, cte6_best, p1, p6;
  eval_k(1, v.min_ade1, v.min_fde1, v.brier_fde1, v.mr1, v.ate1, v.cte1, p1);
  eval_k(6, v.min_ade6, v.min_fde6, v.brier_fde6, v.mr6, ate6_best, cte6_best, p6);
  v.brier_ate6 = ate6_best + (1.0 - p6) * (1.0 - p6);
  v.brier_cte6 = cte6_best + (1.0 - p6) * (1.0 - p6);
  return v;
}

MetricValues aggregate(const std::vector<MetricValues>& rows) {
  MetricValues out;
  for (const auto& r : rows) {
    if (r.n_agents == 0) continue;
    const double w = static_cast<double>(r.n_agents);
    out.min_ade1 += w * r.min_ade1;
    out.min_fde1 += w * r.min_fde1;
    out.brier_fde1 += w * r.brier_fde1;
    out.mr1 += w * r.mr1;
    out.min_ade6 += w * r.min_ade6;
    out.min_fde6 += w * r.min_fde6;
    out.brier_fde6 += w * r.brier_fde6;
    out.mr6 += w * r.mr6;
    out.ate1 += w * r.ate1;
    out.cte1 += w * r.cte1;
    out.brier_ate6 += w * r.brier_ate6;
    out.brier_cte6 += w * r.brier_cte6;
    out.n_agents += r.n_agents;
  }
  if (out.n_agents > 0) {
    const double inv = 1.0 / static_cast<double>(out.n_agents);
    out.min_ade1 *= inv;
    out.min_fde1 *= inv;
    out.brier_fde1 *= inv;
    out.mr1 *= inv;
    out.min_ade6 *= inv;
    out.min_fde6 *= inv;
    out.brier_fde6 *= inv;
    out.mr6 *= inv;
    out.ate1 *= inv;
    out.cte1 *= inv;
    out.brier_ate6 *= inv;
    out.brier_cte6 *= inv;
  }
  return out;
}

AgentGroundTruth ground_truth_of(const AgentTrack& track, int horizon) {
  AgentGroundTruth gt;
  gt.waypoints = track.future;
  gt.fallback_tangent = track.current_pose().h;
  gt.scored = static_cast<int>(track.future.size()) == horizon;
  return gt;
}

MetricValues scenario_metrics(const ForecastSet& forecasts, const Scenario& s) {
  if (forecasts.size() != s.agents.size())
    throw std::invalid_argument("scenario_metrics: forecast/agent count mismatch");
  std::vector<MetricValues> rows;
  for (size_t a = 0; a < forecasts.size(); ++a) {
    if (forecasts[a].modes.empty()) continue;
    const AgentGroundTruth gt = ground_truth_of(
        s.agents[a], static_cast<int>(forecasts[a].modes[0].waypoints.size()));
    if (!gt.scored) continue;
    rows.push_back(agent_metrics(forecasts[a], gt));
  }
  return aggregate(rows);
}

std::string metrics_to_json(const MetricValues& v) {
  nlohmann::json j;
  j["minADE@1"] = v.min_ade1;
  j["minFDE@1"] = v.min_fde1;
  j["BrierMinFDE@1"] = v.brier_fde1;
  j["MR@1"] = v.mr1;
  j["minADE@6"] = v.min_ade6;
  j["minFDE@6"] = v.min_fde6;
  j["BrierMinFDE@6"] = v.brier_fde6;
  j["MR@6"] = v.mr6;
  j["ATE@1"] = v.ate1;
  j["CTE@1"] = v.cte1;
  j["BrierATE@6"] = v.brier_ate6;
  j["BrierCTE@6"] = v.brier_cte6;
  j["agents"] = v.n_agents;
  return j.dump();
}

std::string metrics_csv_header() {
  return "minADE1,minFDE1,BrierMinFDE1,MR1,minADE6,minFDE6,BrierMinFDE6,MR6,"
         "ATE1,CTE1,BrierATE6,BrierCTE6,agents";
}

std::string metrics_csv_row(const MetricValues& v) {
  std::ostringstream os;
  os.precision(17);
  os << v.min_ade1 << ',' << v.min_fde1 << ',' << v.brier_fde1 << ',' << v.mr1 << ','
     << v.min_ade6 << ',' << v.min_fde6 << ',' << v.brier_fde6 << ',' << v.mr6 << ',' << v.ate1
     << ',' << v.cte1 << ',' << v.brier_ate6 << ',' << v.brier_cte6 << ',' << v.n_agents;
  return os.str();
}

}  // namespace relcast
