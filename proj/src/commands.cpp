#include "emctl/commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "emctl/errors.hpp"
#include "emctl/output.hpp"
#include "emctl/pipeline.hpp"

namespace emctl {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string scenario;
  std::string out_dir;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("scenario", f.scenario, "Scenario file or bundled scenario name")->required();
  cmd->add_option("--out", f.out_dir, "Output directory (overrides the scenario's)");
  cmd->add_option("--jobs,-j", f.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Seed for random initial states");
}

fs::path output_path(const Scenario& s, const CommonFlags& f) {
  return fs::path(f.out_dir.empty() ? s.output_dir : f.out_dir) / s.name;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

int cmd_verify(const CommonFlags& f, std::ostream& out) {
  const Scenario s = load_scenario(resolve_scenario(f.scenario));
  PipelineOptions opt;
  opt.jobs = f.jobs;
  const auto results = verify_scenario(s, opt);
  const fs::path dir = output_path(s, f);
  bool all = true;
  for (const auto& r : results) {
    write_atomic(dir / (r.label + ".report.json"), report_json(r.report).dump(2) + "\n");
    const bool ok = r.report.certified();
    all = all && ok;
    out << s.name << " [" << r.label << "] " << to_string(r.report.law) << ": "
        << (ok ? "certified" : "NOT certified") << "\n";
    if (r.report.hard_failure) out << "  hard failure: " << r.report.hard_failure_reason << "\n";
    for (const auto& c : r.report.conditions) {
      out << "  " << std::left << std::setw(32) << c.name << std::setw(8) << to_string(c.status)
          << " margin " << fmt(c.margin);
      if (!c.detail.empty() && c.status == ConditionStatus::fail) out << "  (" << c.detail << ")";
      out << "\n";
    }
  }
  out << "reports written to " << dir.string() << "\n";
  return all ? kExitOk : kExitNotCertified;
}

void write_run(const fs::path& dir, const std::string& scenario, const CaseRun& run) {
  if (run.record) {
    write_atomic(dir / (run.label + ".csv"), trace_csv(*run.record));
    if (run.target) {
      write_atomic(dir / (run.label + ".reference.csv"), reference_csv(*run.record, *run.target));
    }
  }
  write_atomic(dir / (run.label + ".metrics.json"), metrics_json(scenario, run).dump(2) + "\n");
}

void print_run(std::ostream& out, const CaseRun& run) {
  out << "[" << run.label << "] " << run.law << " " << run.method << ": " << to_string(run.status);
  if (run.metrics) {
    const auto& m = *run.metrics;
    out << "  final_error " << fmt(m.final_error) << "  zero_crossings " << m.zero_crossings
        << "  L2 " << fmt(m.running_l2.back()) << "  rate " << fmt(m.fitted_rate) << " (R2 "
        << fmt(m.fit_r2) << ")";
  }
  if (run.forced && !run.report.certified()) out << "  [forced]";
  out << "\n";
  if (!run.message.empty()) out << "  " << run.message << "\n";
}

int run_status_code(const std::vector<const CaseRun*>& runs) {
  int code = kExitOk;
  for (const auto* r : runs) {
    if (r->status == RunStatus::aborted || r->status == RunStatus::failed) return kExitIntegration;
    if (r->status == RunStatus::refused) code = kExitNotCertified;
  }
  return code;
}

int cmd_simulate(const CommonFlags& f, bool force, int seed_ics, std::ostream& out) {
  const Scenario s = load_scenario(resolve_scenario(f.scenario));
  PipelineOptions opt;
  opt.force = force;
  opt.jobs = f.jobs;
  opt.seed = f.seed;
  opt.seed_ics = seed_ics;
  const auto runs = simulate_scenario(s, opt);
  const fs::path dir = output_path(s, f);
  std::vector<std::string> plotted;
  std::vector<const CaseRun*> ptrs;
  for (const auto& r : runs) {
    write_run(dir, s.name, r);
    print_run(out, r);
    if (r.record) plotted.push_back(r.label);
    ptrs.push_back(&r);
  }
  if (!plotted.empty()) write_atomic(dir / "plot.py", plot_script(s.name, plotted));
  out << "outputs written to " << dir.string() << "\n";
  return run_status_code(ptrs);
}

std::vector<double> parse_range(const std::string& spec) {
  double lo = 0, hi = 0;
  int n = 0;
  char tail = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%d%c", &lo, &hi, &n, &tail) != 3 || n < 1) {
    throw ConfigurationError("range must be LO:HI:N, got '" + spec + "'");
  }
  std::vector<double> grid;
  for (int k = 0; k < n; ++k) grid.push_back(n == 1 ? lo : lo + (hi - lo) * k / (n - 1));
  return grid;
}

int cmd_sweep(const CommonFlags& f, std::string parameter, std::vector<double> grid,
              const std::string& range, const std::string& case_label, bool grid_given,
              std::ostream& out, std::ostream& err) {
  Scenario s = load_scenario(resolve_scenario(f.scenario));
  if (!case_label.empty()) {
    bool found = false;
    for (const auto& c : expand_cases(s)) {
      if (c.label == case_label) {
        s = c.scenario;
        found = true;
      }
    }
    if (!found) {
      err << "error: scenario has no case '" << case_label << "'\n";
      return kExitInvalid;
    }
  }
  if (!range.empty()) {
    grid = parse_range(range);
    grid_given = true;
  }
  if (!grid_given && s.sweep) {
    grid = s.sweep->grid;
    if (parameter.empty()) parameter = s.sweep->parameter;
  }
  if (parameter.empty()) parameter = "D_d";
  if (grid.empty()) {
    err << "error: sweep grid is empty\n";
    return kExitInvalid;
  }
  PipelineOptions opt;
  opt.jobs = f.jobs;
  const auto result = sweep_scenario(s, parameter, grid, opt);
  const fs::path dir = output_path(s, f);
  write_atomic(dir / ("sweep_" + parameter + ".csv"), sweep_csv(result));
  std::vector<const CaseRun*> ptrs;
  for (const auto& p : result.points) {
    out << parameter << " = " << std::setw(10) << fmt(p.row.d_d) << "  ph " << p.row.ph_ok
        << "  hurwitz " << p.row.hurwitz_ok << "  sigma " << fmt(p.row.sigma) << "  xi "
        << fmt(p.row.xi_sym_max);
    if (p.run.metrics) {
      out << "  zero_crossings " << p.run.metrics->zero_crossings << "  L2 "
          << fmt(p.run.metrics->running_l2.back());
    }
    out << "  " << to_string(p.run.status) << "\n";
    ptrs.push_back(&p.run);
  }
  out << "sweep written to " << (dir / ("sweep_" + parameter + ".csv")).string() << "\n";
  return run_status_code(ptrs) == kExitIntegration ? kExitIntegration : kExitOk;
}

int cmd_list(std::ostream& out) {
  out << "bundled scenarios (" << scenario_directory() << "):\n";
  for (const auto& name : bundled_scenarios()) {
    std::string description;
    try {
      description = load_scenario(resolve_scenario(name)).description;
    } catch (const Error& e) {
      description = std::string("invalid: ") + e.what();
    }
    out << "  " << std::left << std::setw(28) << name << description << "\n";
  }
  out << "built-in plants:\n";
  for (const auto& p : builtin_plant_names()) {
    out << "  " << std::left << std::setw(28) << p;
    const auto params = builtin_plant_parameters(p);
    for (std::size_t k = 0; k < params.size(); ++k) out << (k ? ", " : "") << params[k];
    out << "\n";
  }
  out << "laws: regulation-1, regulation-2, tracking-1, tracking-2\n";
  return kExitOk;
}

}  // namespace

std::string scenario_directory() {
  if (const char* env = std::getenv("EMCTL_SCENARIO_DIR"); env && *env) return env;
  return EMCTL_SCENARIO_DIR;
}

std::vector<std::string> bundled_scenarios() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(scenario_directory(), ec)) {
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string resolve_scenario(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  const fs::path bundled = fs::path(scenario_directory()) / (arg + ".json");
  if (fs::exists(bundled)) return bundled.string();
  const fs::path named = fs::path(scenario_directory()) / arg;
  if (fs::exists(named)) return named.string();
  return arg;  // load_scenario reports it
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy-shaping control of electromechanical port-Hamiltonian systems", "emctl"};
  app.require_subcommand(0, 1);
  bool list_flag = false;
  app.add_flag("--list", list_flag, "List bundled scenarios");

  CommonFlags vf, sf, wf;
  auto* verify = app.add_subcommand("verify", "Check every condition of the configured law");
  add_common(verify, vf);

  bool force = false;
  int seed_ics = 0;
  auto* simulate = app.add_subcommand("simulate", "Run the closed loop for every case");
  add_common(simulate, sf);
  simulate->add_flag("--force", force, "Simulate even when certification fails");
  simulate->add_option("--seed-ics", seed_ics, "Extra runs per case from random initial states")
      ->check(CLI::NonNegativeNumber);

  std::string parameter, range, case_label;
  std::vector<double> grid;
  auto* sweep = app.add_subcommand("sweep", "Rate metadata and metrics over a parameter grid");
  add_common(sweep, wf);
  sweep->add_option("--param", parameter, "D_d, K_e, Rbar_e, rbar_e, Gamma or k_c");
  auto* grid_opt = sweep->add_option("--grid", grid, "Comma-separated values")->delimiter(',');
  sweep->add_option("--range", range, "LO:HI:N uniform grid");
  sweep->add_option("--case", case_label, "Sweep around this case instead of the base");

  app.add_subcommand("list", "List bundled scenarios and built-in plants");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (list_flag || app.got_subcommand("list")) return cmd_list(out);
    if (app.got_subcommand(verify)) return cmd_verify(vf, out);
    if (app.got_subcommand(simulate)) return cmd_simulate(sf, force, seed_ics, out);
    if (app.got_subcommand(sweep)) {
      return cmd_sweep(wf, parameter, grid, range, case_label, grid_opt->count() > 0, out, err);
    }
    out << app.help();
    return kExitInvalid;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ConfigurationError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const InfeasibleError& e) {
    err << "infeasible target: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIntegration;
  }
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace emctl
