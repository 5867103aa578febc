#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emctl/matrix_analysis.hpp"

namespace emctl {

enum class IntegrationMethod {
  explicit_rk,  // Dormand–Prince 5(4)
  implicit_rk,  // 3-stage Radau IIA, step-doubling error control
};

std::string to_string(IntegrationMethod method);
IntegrationMethod integration_method_from_string(const std::string& name);

struct IntegratorConfig {
  IntegrationMethod method = IntegrationMethod::explicit_rk;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  /// 0 selects horizon/50.
  double max_step = 0.0;
  /// 0 selects 1e-14·horizon.
  double min_step = 0.0;
  double horizon = 1.0;
  int output_samples = 2000;
  /// Per-component magnitude; the absolute tolerance is abs_tol·scale_i.
  Vector scale;

  void validate() const;
  double effective_max_step() const;
  double effective_min_step() const;
};

using OdeRhs = std::function<Vector(double t, const Vector& y)>;

struct StepDiagnostics {
  long accepted = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
  long jacobian_evaluations = 0;
  long newton_failures = 0;
  long domain_rejections = 0;
  double smallest_step = 0.0;
  double largest_step = 0.0;
};

struct IntegrationResult {
  std::vector<double> times;
  std::vector<Vector> states;
  StepDiagnostics diagnostics;
  bool aborted = false;
  double abort_time = 0.0;
  std::string abort_reason;
};

/// Integrates on the uniform grid t_k = k·T/(N−1); steps land on every grid
/// time. A DomainError from the right-hand side rejects the step; if the
/// state cannot advance without leaving the domain the run is aborted and
/// the record truncated. Step-size underflow otherwise throws StiffnessError.
IntegrationResult integrate(const OdeRhs& rhs, const Vector& y0, const IntegratorConfig& config);

}  // namespace emctl
