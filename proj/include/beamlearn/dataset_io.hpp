#pragma once

#include <string>

#include "json.hpp"

#include "beamlearn/channels.hpp"

namespace beamlearn {

nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
// Strict: unknown keys raise ConfigError; missing keys keep defaults.
ScenarioConfig scenario_from_json(const nlohmann::json& j);

// Hash of the canonical scenario dump plus labeler and count; identical
// configs produce identical manifests.
std::string dataset_config_hash(const ScenarioConfig& cfg, const std::string& labeler,
                                std::size_t count);

// On-disk layout: <dir>/manifest.json plus one raw little-endian float64
// blob per stacked tensor (complex entries as re/im pairs).
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace beamlearn
