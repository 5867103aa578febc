#pragma once

#include <array>
#include <string>

#include "emctl/ph_model.hpp"

namespace emctl {

/// Position reference q⋆(t) with analytic derivatives up to third order.
struct MotionProfile {
  enum class Kind { constant, sinusoid };
  Kind kind = Kind::constant;
  double offset = 0.0;
  double amplitude = 0.0;
  double omega = 0.0;
  double phase = 0.0;

  /// {q, q̇, q̈, q⃛} at t.
  std::array<double, 4> derivatives(double t) const;
  double period() const;
};

/// N/D for the scalar force balance x⋆ = √(2N/D), with
/// N = m q̈ + R_m q̇ + V'(q) and D = −Ψ'(q).
double feedforward_radicand(const EMPlant& plant, double q, double dq, double ddq);

/// Feasible trajectory (q⋆, m q̇⋆, x⋆) for a scalar constant-mass plant.
/// Throws InfeasibleError when the radicand is nonpositive at any of
/// check_samples uniform samples over [0, horizon].
DesiredTarget make_reference(const EMPlant& plant, const MotionProfile& profile,
                             double horizon, int check_samples = 10000);

/// Assignable equilibrium (q_d, 0, x_d) with the same force balance.
DesiredTarget make_equilibrium_target(const EMPlant& plant, const Vector& q_d);

}  // namespace emctl
