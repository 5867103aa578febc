#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace emctl {

/// 0 success/certified, 1 not certified or refused, 2 invalid input,
/// 3 integration failure.
enum ExitCode : int { kExitOk = 0, kExitNotCertified = 1, kExitInvalid = 2, kExitIntegration = 3 };

/// EMCTL_SCENARIO_DIR from the environment, else the bundled directory.
std::string scenario_directory();
/// Bundled scenario names (file stems), sorted.
std::vector<std::string> bundled_scenarios();
/// A readable path as given, else a bundled scenario by name.
std::string resolve_scenario(const std::string& arg);

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace emctl
