#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emctl/ph_model.hpp"
#include "emctl/shaping.hpp"

namespace emctl {

enum class LawKind { regulation1, regulation2, tracking1, tracking2 };

std::string to_string(LawKind kind);
LawKind law_kind_from_string(const std::string& name);
/// Laws built on the mapped coordinate z and an auxiliary φ.
bool uses_mapped_coordinate(LawKind kind);

/// Γ (n_m×n_e), D_d (n_e×n_m), K_e and R̄_e = R_e + K_e.
struct ClosedLoopShape {
  Matrix Gamma;
  Matrix D_d;
  Matrix K_e;
  Matrix Rbar_e;
};

/// Throws ConfigurationError on bad dimensions or singular J_e − R̄_e.
ClosedLoopShape make_shape(const EMPlant& plant, const Matrix& gamma,
                           const Matrix& d_d, const Matrix& k_e);

/// J_d − R_d with
///   [[0, I, 0], [−I, −R_m, Γ], [0, −Γᵀ + D_d, J_e − R̄_e]].
Matrix target_structure(const EMPlant& plant, const ClosedLoopShape& shape);
Matrix target_interconnection(const EMPlant& plant, const ClosedLoopShape& shape);
Matrix target_dissipation(const EMPlant& plant, const ClosedLoopShape& shape);
/// [[R_m, −½D_dᵀ], [−½D_d, R̄_e]].
Matrix energy_balance_matrix(const EMPlant& plant, const ClosedLoopShape& shape);

/// ∂z/∂x_e = −G_eᵀ(J_e − R̄_e)⁻ᵀ.
Matrix z_jacobian(const EMPlant& plant, const ClosedLoopShape& shape);
Vector z_map(const ClosedLoopShape& shape, const EMPlant& plant, const Vector& q,
             const Vector& x);
/// ∇_{x_e} of a z-function from its z-gradient and the inverse relation.
Vector z_gradient_to_x(const EMPlant& plant, const ClosedLoopShape& shape,
                       const Vector& grad_z);
Vector x_gradient_to_z(const EMPlant& plant, const ClosedLoopShape& shape,
                       const Vector& grad_x);

Vector regulation_law_1(const EMPlant& plant, const ClosedLoopShape& shape,
                        const ShapingFunction& phi1, const Vector& eta);
Vector regulation_law_2(const EMPlant& plant, const ClosedLoopShape& shape,
                        const ShapingFunction& phi1, const ShapingFunction& phi2_z,
                        const Vector& eta);
Vector tracking_law_1(const EMPlant& plant, const ClosedLoopShape& shape,
                      const ShapingFunction& theta1, const Vector& eta, double t);
Vector tracking_law_2(const EMPlant& plant, const ClosedLoopShape& shape,
                      const ShapingFunction& phi2, const ShapingFunction& theta2,
                      const Vector& eta, double t);

enum class ConditionStatus { pass, fail, assumed };
std::string to_string(ConditionStatus status);

struct Condition {
  std::string name;
  std::string description;
  ConditionStatus status = ConditionStatus::fail;
  double margin = 0.0;  // positive when satisfied
  std::string detail;
};

struct ConditionReport {
  LawKind law = LawKind::regulation1;
  std::vector<Condition> conditions;
  std::map<std::string, double> constants;
  bool hard_failure = false;
  std::string hard_failure_reason;

  bool certified() const;
  std::vector<std::string> failed() const;
  const Condition* find(const std::string& name) const;
};

struct ShapingChoice {
  /// Gain of the quadratic primary term (Φ₁, Φ₂, Θ₁ or Θ₂).
  Matrix gain;
  /// Auxiliary φ for the mapped-coordinate laws; defaults to cubic with unit
  /// weights.
  std::optional<ShapingFunction> auxiliary;
  /// Replaces the built-in quadratic primary term when set.
  std::optional<ShapingFunction> primary;
};

/// One of the four static feedback laws bound to a plant, shape and target.
class ControllerLaw {
 public:
  ControllerLaw(LawKind kind, EMPlant plant, ClosedLoopShape shape,
                DesiredTarget target, ShapingFunction primary,
                std::optional<ShapingFunction> auxiliary);

  LawKind kind() const { return kind_; }
  const EMPlant& plant() const { return plant_; }
  const ClosedLoopShape& shape() const { return shape_; }
  const DesiredTarget& target() const { return target_; }
  const ShapingFunction& primary() const { return primary_; }
  const std::optional<ShapingFunction>& auxiliary() const { return auxiliary_; }

  /// Control input; throws RefusalError unless certified or forced.
  Vector input(const Vector& eta, double t) const;
  /// Control input without the certification gate.
  Vector raw_input(const Vector& eta, double t) const;

  double desired_energy(const Vector& eta, double t) const;
  Vector desired_gradient(const Vector& eta, double t) const;
  Matrix desired_hessian(const Vector& eta, double t) const;

  /// F_d of the closed loop this law produces (Γ ignored by the Γ = 0 laws).
  Matrix closed_loop_structure() const;
  Vector closed_loop_field(const Vector& eta, double t) const;
  Vector target_field(const Vector& eta, double t) const;

  void attach_report(ConditionReport report, bool force);
  const std::optional<ConditionReport>& report() const { return report_; }
  bool forced() const { return forced_; }
  bool cleared() const;

 private:
  LawKind kind_;
  EMPlant plant_;
  ClosedLoopShape shape_;
  DesiredTarget target_;
  ShapingFunction primary_;
  std::optional<ShapingFunction> auxiliary_;
  double energy_offset_ = 0.0;
  std::optional<ConditionReport> report_;
  bool forced_ = false;
};

/// Builds the law with the quadratic primary term centred so that the target
/// is an equilibrium (regulation) or a closed-loop trajectory (tracking).
ControllerLaw make_controller(LawKind kind, const EMPlant& plant,
                              const ClosedLoopShape& shape,
                              const DesiredTarget& target,
                              const ShapingChoice& shaping);

/// max ‖∇_q H_e + Γ∇φ‖ over the given states, relative to ‖∇_q H_e‖ scale.
double coupling_linearity_residual(const EMPlant& plant, const ClosedLoopShape& shape,
                                   const ShapingFunction& phi,
                                   const std::vector<Vector>& states);

}  // namespace emctl
