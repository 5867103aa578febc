#pragma once

#include <functional>
#include <string>

#include "emctl/matrix_analysis.hpp"

namespace emctl {

/// Weakly coupled electromechanical plant
///   H = ½pᵀM⁻¹(q)p + V(q) + ½x_eᵀΨ(q)x_e.
/// Optional callbacks left empty fall back to central finite differences
/// (step 1e-6 relative); uses_finite_differences() reports when that happens.
struct EMPlant {
  std::string name;
  int n_m = 0;
  int n_e = 0;

  std::function<Matrix(const Vector& q)> mass;
  std::function<Matrix(const Vector& q, int k)> mass_derivative;  // empty: constant M
  std::function<double(const Vector& q)> potential;
  std::function<Vector(const Vector& q)> potential_gradient;
  std::function<Matrix(const Vector& q)> potential_hessian;
  std::function<Matrix(const Vector& q)> elastance;
  std::function<Matrix(const Vector& q, int k)> elastance_derivative;
  std::function<Matrix(const Vector& q, int k, int l)> elastance_second_derivative;

  Matrix R_m;
  Matrix J_e;
  Matrix R_e;
  Matrix G_e;

  /// Open box on q; infinite entries mean unbounded.
  Vector q_lower;
  Vector q_upper;

  /// Characteristic magnitude per state component, used for tolerances,
  /// finite-difference steps and integrator error weights.
  Vector state_scale;

  int state_size() const { return 2 * n_m + n_e; }
  bool uses_finite_differences() const;
  bool q_in_bounds(const Vector& q) const;
  /// Throws ConfigurationError when structural invariants fail.
  void validate() const;
};

struct StateView {
  Vector q, p, x;
};

StateView split_state(const EMPlant& plant, const Vector& eta);
Vector join_state(const Vector& q, const Vector& p, const Vector& x);

void require_in_bounds(const EMPlant& plant, const Vector& q);

Matrix elastance_derivative(const EMPlant& plant, const Vector& q, int k);
Matrix elastance_second_derivative(const EMPlant& plant, const Vector& q,
                                   int k, int l);
Vector potential_gradient(const EMPlant& plant, const Vector& q);
Matrix potential_hessian(const EMPlant& plant, const Vector& q);

double coupling_energy(const EMPlant& plant, const Vector& q, const Vector& x);
/// ∇_q H_e = [½xᵀ ∂Ψ/∂q_k x]_k.
Vector coupling_energy_gradient_q(const EMPlant& plant, const Vector& q,
                                  const Vector& x);

double hamiltonian(const EMPlant& plant, const Vector& eta);
Vector grad_hamiltonian(const EMPlant& plant, const Vector& eta);
Matrix hessian_hamiltonian(const EMPlant& plant, const Vector& eta);

/// The §-form matrices F = [[0, I, 0], [−I, −R_m, 0], [0, 0, J_e − R_e]] and
/// G = [0; 0; G_e].
Matrix open_loop_structure(const EMPlant& plant);
Matrix input_matrix(const EMPlant& plant);

Vector open_loop_field(const EMPlant& plant, const Vector& eta, const Vector& u);
/// Componentwise magnitude of the terms summed in open_loop_field,
/// |F|·|∇H| + |G|·|u|, used to scale consistency tolerances.
Vector field_term_scale(const EMPlant& plant, const Vector& eta, const Vector& u);
/// Port output y = G_eᵀ∇_x H.
Vector output(const EMPlant& plant, const Vector& eta);

struct EquilibriumCheck {
  bool assignable = false;
  double residual = 0.0;  // ‖∇_q H(η_d)‖
  double momentum = 0.0;  // ‖p_d‖
};

EquilibriumCheck assignable_equilibrium_check(const EMPlant& plant,
                                              const Vector& eta_d,
                                              double tol = -1.0);
/// ū solving 0 = (J_e − R_e)Ψ(q_d)x_d + G_e ū.
Vector equilibrium_input(const EMPlant& plant, const Vector& eta_d);

/// Desired equilibrium or feasible trajectory η⋆(t) with η̇⋆(t).
struct DesiredTarget {
  enum class Kind { equilibrium, trajectory };
  Kind kind = Kind::equilibrium;
  std::function<Vector(double t)> state;
  std::function<Vector(double t)> rate;
  /// Positions at which the reference was built, for reporting.
  std::string description;

  bool is_equilibrium() const { return kind == Kind::equilibrium; }
};

DesiredTarget constant_target(const Vector& eta_d);

/// ‖η̇⋆ − F∇H(η⋆) − G u⋆‖ at time t.
double feasibility_residual(const EMPlant& plant, const DesiredTarget& target,
                            const std::function<Vector(double)>& u_star,
                            double t);
/// Componentwise relative version: max_i |r_i| / (|η̇⋆_i| + field_term_scale_i).
double feasibility_residual_relative(
    const EMPlant& plant, const DesiredTarget& target,
    const std::function<Vector(double)>& u_star, double t);

}  // namespace emctl
