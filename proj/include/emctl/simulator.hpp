#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emctl/controllers.hpp"
#include "emctl/integrators.hpp"
#include "emctl/ph_model.hpp"

namespace emctl {

struct SimRecord {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  /// H_d along the run; empty for open-loop runs.
  std::vector<double> desired_energy;
  /// η − η⋆(t); empty without a reference.
  std::vector<Vector> errors;
  std::vector<double> error_norms;
  StepDiagnostics diagnostics;
  bool aborted = false;
  double abort_time = 0.0;
  std::string abort_reason;
  int n_m = 0;
  int n_e = 0;

  std::size_t size() const { return times.size(); }
  bool has_law() const { return !desired_energy.empty(); }
  bool has_reference() const { return !errors.empty(); }
};

/// Integration config with the plant's state scale and the method suited to
/// the plant (implicit when the electrical rate dwarfs the mechanical one).
IntegratorConfig default_integrator(const EMPlant& plant, double horizon);

/// Closed loop. Throws RefusalError unless the law is certified or forced,
/// DomainError when η₀ is outside the q bounds.
SimRecord simulate(const ControllerLaw& law, const Vector& eta0, const IntegratorConfig& config);

/// Open loop under u(t); the reference, when given, fills the error columns.
SimRecord simulate_open_loop(const EMPlant& plant, const std::function<Vector(double)>& u,
                             const Vector& eta0, const IntegratorConfig& config,
                             const std::optional<DesiredTarget>& reference = std::nullopt);

}  // namespace emctl
