#pragma once

#include <functional>
#include <string>

#include "emctl/matrix_analysis.hpp"

namespace emctl {

/// Scalar energy-shaping term evaluated on x_e or on the mapped coordinate z.
struct ShapingFunction {
  enum class Arity { electrical, z };
  Arity arity = Arity::electrical;
  bool time_varying = false;
  std::string kind = "custom";
  std::function<double(const Vector& y, double t)> value;
  std::function<Vector(const Vector& y, double t)> gradient;
  std::function<Matrix(const Vector& y, double t)> hessian;

  /// Quadratic terms only: ½(y − center(t))ᵀ gain (y − center(t)).
  Matrix gain;
  std::function<Vector(double t)> center;
};

ShapingFunction quadratic_shaping(ShapingFunction::Arity arity, const Matrix& gain,
                                  std::function<Vector(double)> center,
                                  bool time_varying);

/// φ(y) = Σ w_i y_i³/3, so ∇φ = w∘y∘y.
ShapingFunction cubic_shaping(const Vector& weights);

/// Largest relative mismatch between the supplied gradient/Hessian and
/// central differences of value/gradient at (y, t).
double shaping_consistency_error(const ShapingFunction& f, const Vector& y,
                                 double t, const Vector& scale);

}  // namespace emctl
