#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "emctl/pipeline.hpp"

namespace emctl {

/// Writes to a sibling temporary file, then renames over the target.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// t, q…, p…, xe…, u…, Hd, err_norm; one row per sample, %.17g.
std::string trace_csv(const SimRecord& record);
/// t, q_star…, p_star…, xe_star…
std::string reference_csv(const SimRecord& record, const DesiredTarget& target);

nlohmann::json report_json(const ConditionReport& report);
nlohmann::json metrics_json(const std::string& scenario, const CaseRun& run);

/// parameter, ph_ok, hurwitz_ok, riccati_ok, gamma, eps, sigma, xi_sym_max,
/// then the per-point run metrics.
std::string sweep_csv(const SweepResult& result);

/// Standalone matplotlib script drawing position, running L2 norm and input
/// panels for the given run labels.
std::string plot_script(const std::string& title, const std::vector<std::string>& labels);

}  // namespace emctl
