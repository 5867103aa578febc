#include "emctl/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <random>
#include <thread>

#include "emctl/errors.hpp"

namespace emctl {

namespace {

SamplingRegion region_for(const BuiltScenario& b) {
  if (b.verification.region) return *b.verification.region;
  return region_around(b.plant, b.target, b.verification.horizon);
}

VerifiedLaw verify_built(const BuiltScenario& b) {
  return verify_configuration(b.law, b.plant, b.Gamma, b.D_d, b.K_e, b.target, b.shaping,
                              b.verification);
}

std::string value_label(const std::string& parameter, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%.6g", parameter.c_str(), v);
  return buf;
}

Vector draw_initial_state(const SamplingRegion& region, const EMPlant& plant,
                          std::uint64_t seed, int case_index, int draw) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(case_index), static_cast<std::uint32_t>(draw)};
  std::mt19937_64 rng(seq);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vector eta(region.dimension());
    for (int i = 0; i < eta.size(); ++i) {
      std::uniform_real_distribution<double> u(region.lower(i), region.upper(i));
      eta(i) = region.lower(i) == region.upper(i) ? region.lower(i) : u(rng);
    }
    if (plant.q_in_bounds(eta.head(plant.n_m))) return eta;
  }
  throw ConfigurationError("sampling region has no admissible initial states");
}

}  // namespace

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::ok: return "ok";
    case RunStatus::refused: return "refused";
    case RunStatus::aborted: return "aborted";
    case RunStatus::failed: return "failed";
  }
  return "unknown";
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<CaseVerification> verify_scenario(const Scenario& s, const PipelineOptions& opt) {
  const auto cases = expand_cases(s);
  std::vector<CaseVerification> out(cases.size());
  parallel_for(static_cast<int>(cases.size()), opt.jobs, [&](int i) {
    const BuiltScenario b = build_scenario(cases[i].scenario);
    out[i] = {cases[i].label, verify_built(b).report};
  });
  return out;
}

CaseRun run_case(const std::string& label, const Scenario& s, bool force,
                 const std::optional<Vector>& eta0) {
  CaseRun run;
  run.label = label;
  run.forced = force;
  const BuiltScenario b = build_scenario(s);
  run.law = to_string(b.law);
  run.method = to_string(b.integrator.method);
  run.target = b.target;
  run.eta0 = eta0 ? *eta0 : b.eta0;
  auto verified = verify_built(b);
  run.report = verified.report;
  if (!verified.law) {
    run.status = RunStatus::refused;
    run.message = "law could not be constructed: " + verified.report.hard_failure_reason;
    return run;
  }
  ControllerLaw& law = *verified.law;
  law.attach_report(verified.report, force);
  try {
    run.record = simulate(law, run.eta0, b.integrator);
  } catch (const RefusalError& e) {
    run.status = RunStatus::refused;
    run.message = e.what();
    return run;
  } catch (const StiffnessError& e) {
    run.status = RunStatus::failed;
    run.message = e.what();
    return run;
  } catch (const NumericError& e) {
    run.status = RunStatus::failed;
    run.message = e.what();
    return run;
  }
  run.noise_floor = default_noise_floor(b.target, b.integrator.horizon, b.integrator.rel_tol);
  MetricsOptions mo;
  mo.noise_floor = run.noise_floor;
  run.metrics = compute_metrics(*run.record, mo);
  if (run.record->aborted) {
    run.status = RunStatus::aborted;
    run.message = run.record->abort_reason;
  } else {
    run.status = RunStatus::ok;
  }
  return run;
}

std::vector<CaseRun> simulate_scenario(const Scenario& s, const PipelineOptions& opt) {
  Scenario base = s;
  if (opt.seed) base.seed = *opt.seed;
  const auto cases = expand_cases(base);
  const int per_case = 1 + std::max(0, opt.seed_ics);
  const int n = static_cast<int>(cases.size()) * per_case;
  std::vector<CaseRun> out(n);
  parallel_for(n, opt.jobs, [&](int i) {
    const int c = i / per_case, draw = i % per_case;
    const auto& sc = cases[c];
    if (draw == 0) {
      out[i] = run_case(sc.label, sc.scenario, opt.force);
      return;
    }
    const BuiltScenario b = build_scenario(sc.scenario);
    const Vector eta0 = draw_initial_state(region_for(b), b.plant, base.seed, c, draw);
    out[i] = run_case(sc.label + ".ic" + std::to_string(draw), sc.scenario, opt.force, eta0);
  });
  return out;
}

SweepResult sweep_scenario(const Scenario& s, const std::string& parameter,
                           std::vector<double> grid, const PipelineOptions& opt) {
  if (grid.empty()) throw ConfigurationError("sweep grid is empty");
  const std::string path = sweep_key_path(parameter);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  Scenario base = s;
  base.cases.clear();

  std::vector<Scenario> points;
  for (double v : grid) points.push_back(with_override(base, path, v));
  const BuiltScenario b0 = build_scenario(points.front());
  const SamplingRegion region = region_for(b0);

  auto law_for = [&](double v) {
    const auto it = std::find(grid.begin(), grid.end(), v);
    const BuiltScenario b = build_scenario(points[it - grid.begin()]);
    const auto shape = make_shape(b.plant, b.Gamma, b.D_d, b.K_e);
    return make_controller(b.law, b.plant, shape, b.target, b.shaping);
  };
  const auto rows = coupled_damping_sweep(law_for, grid, region);

  SweepResult result;
  result.parameter = parameter;
  result.points.resize(grid.size());
  parallel_for(static_cast<int>(grid.size()), opt.jobs, [&](int i) {
    result.points[i].row = rows[i];
    result.points[i].run = run_case(value_label(parameter, grid[i]), points[i], true);
  });
  return result;
}

}  // namespace emctl
