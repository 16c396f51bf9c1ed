#pragma once

#include "relcast/scenario.hpp"

namespace relcast {

enum class MapTemplateKind {
  straight,
  curve,
  fork,
  merge,
  intersection,
  crosswalk_street,
};

const char* map_template_name(MapTemplateKind k);
MapTemplateKind map_template_from(const std::string& s);

struct MapTemplateParams {
  MapTemplateKind kind = MapTemplateKind::straight;
  double lane_length = 70.0;
  double curve_radius = 45.0;
  int n_lanes = 2;
  double lane_width = 3.5;
};

/// Behavior knobs for the kinematic rollouts; fork priors and rates are
/// explicit config rather than hidden constants.
struct BehaviorMix {
  double fork_left_prior = 0.5;    // probability of the non-straight branch
  double lane_change_rate = 0.15;  // chance an eligible agent changes lane
  double truncate_frac = 0.0;      // agents with futures shorter than horizon
  double late_appear_frac = 0.0;   // agents with partially observed history
};

/// One synthetic scenario: a template map plus kinematically rolled-out
/// agents (lane following with curvature-limited speed, gap-keeping behind
/// leaders, branch choices at forks/intersections). Deterministic per seed.
/// The whole scene is placed in a random global frame so the world
/// coordinates carry no information.
Scenario generate(const MapTemplateParams& tpl, const Domain& domain, int n_agents,
                  const BehaviorMix& mix, uint64_t seed);

/// Round-robin over the given template kinds.
std::vector<Scenario> generate_dataset(const std::vector<MapTemplateKind>& kinds,
                                       const Domain& domain, int count, int max_agents,
                                       const BehaviorMix& mix, uint64_t seed);

}  // namespace relcast
