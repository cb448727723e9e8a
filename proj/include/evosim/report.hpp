#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "evosim/engine.hpp"

namespace evosim {

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double x);

std::string summary_json(const SimulationReport& report);
std::string timeseries_csv(const SimulationReport& report);
std::string fills_csv(const SimulationReport& report);
std::string generations_csv(const SimulationReport& report);
std::string lives_csv(const SimulationReport& report);
std::string cascades_csv(const SimulationReport& report);

// Four plot-data panels: AUM vs equity, group cash, ROI, per-bar PnL.
std::string series_aum_equity_csv(const SimulationReport& report);
std::string series_group_cash_csv(const SimulationReport& report);
std::string series_roi_csv(const SimulationReport& report);
std::string series_bar_pnl_csv(const SimulationReport& report);

// Writes `text` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& text);

// Every report artifact plus the resolved scenario. Returns the file names.
std::vector<std::string> write_report(const SimulationReport& report, const ScenarioConfig& config,
                                      const std::filesystem::path& out_dir);

}  // namespace evosim
