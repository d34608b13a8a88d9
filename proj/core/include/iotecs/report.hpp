// Report rendering: loads run directories and renders the Tables-style CSV
// (one row per configuration) or full JSON.
#pragma once

#include "iotecs/orchestrator.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace iotecs {

std::string report_csv_header();
std::string report_csv_row(const RunReport& report);

struct LoadedRun {
    RunReport report;
    std::filesystem::path dir;
};

// Accepts either a single run directory (rep_<k>/ subdirs plus report.json)
// or a directory of run directories. Rebuilds aggregates from the raw
// rep_<k>/metrics.json files when present. Throws std::runtime_error on an
// empty directory or when repetitions in one run carry different topology
// digests ("inconsistent runs").
std::vector<LoadedRun> load_runs(const std::filesystem::path& dir);

std::string render_csv(const std::vector<LoadedRun>& runs);
nlohmann::json render_json(const std::vector<LoadedRun>& runs);

} // namespace iotecs
