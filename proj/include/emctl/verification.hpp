#pragma once

#include <optional>
#include <vector>

#include "emctl/contraction.hpp"
#include "emctl/controllers.hpp"

namespace emctl {

struct VerificationSettings {
  /// Sampling box; region_around(target, horizon) when unset.
  std::optional<SamplingRegion> region;
  double horizon = 1.0;
  /// Times at which trajectory feasibility is checked.
  int feasibility_samples = 100;
  std::vector<double> eps_grid = default_eps_grid();
  /// Cap on states used for the pointwise identity checks.
  int max_identity_points = 400;
};

inline constexpr double kIdentityTolerance = 1e-9;
inline constexpr double kFeasibilityTolerance = 1e-8;
inline constexpr double kShapingTolerance = 1e-6;
inline constexpr double kCouplingTolerance = 1e-8;

/// Every side condition of the law's stability or contraction result, with
/// margins (positive when satisfied) and the estimated band constants.
ConditionReport verify_conditions(const ControllerLaw& law,
                                  const VerificationSettings& settings = {});

struct VerifiedLaw {
  std::optional<ControllerLaw> law;
  ConditionReport report;
};

/// Builds shape and law, verifies, and attaches the report (not forced).
/// Construction failures (singular J_e − R̄_e, coupling mismatch, infeasible
/// target) become a hard-failed report with no law.
VerifiedLaw verify_configuration(LawKind kind, const EMPlant& plant, const Matrix& gamma,
                                 const Matrix& d_d, const Matrix& k_e,
                                 const DesiredTarget& target, const ShapingChoice& shaping,
                                 const VerificationSettings& settings = {});

/// Largest componentwise mismatch between the closed-loop field and F_d∇H_d,
/// each component scaled by the magnitudes of the terms that produce it.
double law_field_mismatch(const ControllerLaw& law, const Vector& eta, double t);

/// ‖−∇_qH_d + Γ∇_{x_e}H_d + ∇_qH‖ relative to the size of its terms.
double matching_mismatch(const ControllerLaw& law, const Vector& eta, double t);

/// Definition-1 residual of the target under the law's own input,
/// componentwise relative.
double trajectory_feasibility_mismatch(const ControllerLaw& law, double t);

}  // namespace emctl
