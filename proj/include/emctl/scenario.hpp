#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emctl/builtin_plants.hpp"
#include "emctl/controllers.hpp"
#include "emctl/integrators.hpp"
#include "emctl/verification.hpp"

namespace emctl {

/// A number (scalar·I, or a length-n vector for vector slots) or a row list.
struct MatrixValue {
  std::vector<std::vector<double>> rows;
  bool scalar = false;

  static MatrixValue of(double v) { return {{{v}}, true}; }
  Matrix to_matrix(int rows, int cols, const char* what) const;
  bool operator==(const MatrixValue&) const = default;
};

struct InlinePlant {
  std::string name = "custom";
  int n_m = 1;
  int n_e = 1;
  MatrixValue mass, stiffness;
  std::vector<double> linear, quartic;
  std::string elastance_form = "affine";  // or "inverse_affine"
  MatrixValue elastance_base;
  std::vector<MatrixValue> elastance_slopes;
  MatrixValue R_m, J_e, R_e, G_e;
  std::vector<double> q_lower, q_upper, state_scale;
  bool operator==(const InlinePlant&) const = default;
};

struct PlantConfig {
  std::string builtin;  // empty when inline
  std::map<std::string, double> parameters;
  std::optional<InlinePlant> definition;
  bool operator==(const PlantConfig&) const = default;
};

struct ControllerConfig {
  LawKind law = LawKind::tracking1;
  std::optional<MatrixValue> K_e;
  /// R̄_e directly; K_e = R̄_e − R_e.
  std::optional<MatrixValue> Rbar_e;
  /// Resistance form, R̄_e = r̄_e⁻¹·I.
  std::optional<double> rbar_e;
  MatrixValue D_d = MatrixValue::of(0.0);
  /// "absolute", or "gamma": the coupled damping is D_d·Γᵀ.
  std::string D_d_basis = "absolute";
  MatrixValue Gamma = MatrixValue::of(0.0);
  /// Gain of the quadratic shaping term.
  std::optional<MatrixValue> k_c;
  std::vector<double> auxiliary_weights;
  bool operator==(const ControllerConfig&) const = default;
};

struct TargetConfig {
  std::string kind = "equilibrium";  // or "sinusoid"
  std::vector<double> q_d;
  double offset = 0.0, amplitude = 0.0, omega = 0.0, phase = 0.0;
  bool operator==(const TargetConfig&) const = default;
};

struct InitialConfig {
  std::vector<double> state;
  /// Added to η⋆(0) when state is empty.
  std::vector<double> offset;
  bool operator==(const InitialConfig&) const = default;
};

struct IntegratorSection {
  std::string method = "auto";
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = 0.0;
  double min_step = 0.0;
  double horizon = 1.0;
  int output_samples = 2000;
  bool operator==(const IntegratorSection&) const = default;
};

struct RegionConfig {
  std::vector<double> lower, upper;
  int points_per_dim = 9;
  int time_samples = 9;
  bool operator==(const RegionConfig&) const = default;
};

struct CaseConfig {
  std::string label;
  /// Dotted key path → value, applied to the base scenario.
  std::map<std::string, nlohmann::json> set;
  bool operator==(const CaseConfig&) const = default;
};

struct SweepConfig {
  std::string parameter = "D_d";
  std::vector<double> grid;
  bool operator==(const SweepConfig&) const = default;
};

struct Scenario {
  std::string name;
  std::string description;
  std::string notes;
  PlantConfig plant;
  ControllerConfig controller;
  TargetConfig target;
  InitialConfig initial;
  IntegratorSection integrator;
  std::optional<RegionConfig> region;
  std::vector<CaseConfig> cases;
  std::optional<SweepConfig> sweep;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  bool operator==(const Scenario&) const = default;
};

/// Throws SchemaError with the line of the offending entry (0 when unknown).
Scenario parse_scenario(const std::string& text, const std::string& origin = "<scenario>");
Scenario load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& s);
std::string emit_scenario(const Scenario& s);

/// Base scenario with one case's overrides applied; the label becomes part of
/// the name. Without cases the base is returned once with label "base".
struct ScenarioCase {
  std::string label;
  Scenario scenario;
};
std::vector<ScenarioCase> expand_cases(const Scenario& s);
/// Sets a dotted key (e.g. "controller.D_d") and re-validates.
Scenario with_override(const Scenario& s, const std::string& key, const nlohmann::json& value);

/// Keys accepted by sweeps: D_d and the scalar gains.
std::vector<std::string> sweep_parameters();
std::string sweep_key_path(const std::string& parameter);

struct BuiltScenario {
  EMPlant plant;
  DesiredTarget target;
  LawKind law;
  Matrix Gamma, D_d, K_e;
  ShapingChoice shaping;
  Vector eta0;
  IntegratorConfig integrator;
  VerificationSettings verification;
};

/// Instantiates plant, target, gains and settings; ConfigurationError or
/// InfeasibleError on inconsistent content.
BuiltScenario build_scenario(const Scenario& s);

}  // namespace emctl
