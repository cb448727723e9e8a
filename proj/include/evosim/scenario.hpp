#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "evosim/engine.hpp"

namespace evosim {

// JSON scenario files. Keys mirror ScenarioConfig; omitted keys keep their
// defaults, unknown keys are a ConfigError naming the key. Relative CSV and
// weight paths resolve against `base_dir`.
ScenarioConfig scenario_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const ScenarioConfig& config);

// Flat parameter names accepted by sweeps, e.g. "oracle_accuracy".
const std::vector<std::string>& sweep_parameters();
// Throws ConfigError for an unknown name or an unparsable value.
void set_parameter(ScenarioConfig& config, std::string_view name, double value);

std::string_view to_string(PerceptionMode m);
std::string_view to_string(SignalScope s);
std::string_view to_string(SlippageModel m);

}  // namespace evosim
