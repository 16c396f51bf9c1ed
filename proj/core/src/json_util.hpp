#pragma once

// Internal JSON helpers shared by the map and scenario serializers.

#include <json.hpp>

#include "relcast/lane_graph.hpp"

namespace relcast::detail {

nlohmann::json polyline_json(const std::vector<Vec2>& pts);
std::vector<Vec2> polyline_from_json(const nlohmann::json& arr);
nlohmann::json lane_to_json(const LaneSpec& lane);
LaneSpec lane_from_json(const nlohmann::json& j);
nlohmann::json crosswalk_to_json(const CrosswalkSpec& cw);
CrosswalkSpec crosswalk_from_json(const nlohmann::json& j);

}  // namespace relcast::detail
