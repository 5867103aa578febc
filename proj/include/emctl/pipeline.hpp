#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emctl/metrics.hpp"
#include "emctl/scenario.hpp"

namespace emctl {

struct PipelineOptions {
  bool force = false;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  /// Extra runs per case from initial states drawn in the sampling region.
  int seed_ics = 0;
};

struct CaseVerification {
  std::string label;
  ConditionReport report;
};

std::vector<CaseVerification> verify_scenario(const Scenario& s, const PipelineOptions& opt = {});

enum class RunStatus { ok, refused, aborted, failed };
std::string to_string(RunStatus status);

struct CaseRun {
  std::string label;
  RunStatus status = RunStatus::failed;
  std::string message;
  ConditionReport report;
  bool forced = false;
  Vector eta0;
  std::optional<DesiredTarget> target;
  std::optional<SimRecord> record;
  std::optional<Metrics> metrics;
  double noise_floor = 0.0;
  std::string law;
  std::string method;
};

std::vector<CaseRun> simulate_scenario(const Scenario& s, const PipelineOptions& opt = {});

/// One closed-loop run of an already expanded scenario.
CaseRun run_case(const std::string& label, const Scenario& s, bool force,
                 const std::optional<Vector>& eta0 = std::nullopt);

struct SweepPoint {
  RateSweepRow row;
  CaseRun run;
};

struct SweepResult {
  std::string parameter;
  std::vector<SweepPoint> points;
};

/// Rate metadata and a forced simulation per grid value (sorted ascending).
SweepResult sweep_scenario(const Scenario& s, const std::string& parameter,
                           std::vector<double> grid, const PipelineOptions& opt = {});

/// Runs fn(0..n-1) on up to jobs threads; exceptions are rethrown in index order.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace emctl
