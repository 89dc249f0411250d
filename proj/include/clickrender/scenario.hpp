#pragma once

#include "clickrender/device.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace clickrender {

inline constexpr const char* kScenarioSchema = "clickrender.scenario/1";

/// Versioned scenario document: grid, finger placements and mechanics, drive, step size.
nlohmann::json scenario_to_json(const DeviceState& state);

/// Throws std::invalid_argument on a schema mismatch or an invalid device.
DeviceState scenario_from_json(const nlohmann::json& doc);

DeviceState load_scenario(const std::string& path);

}  // namespace clickrender
