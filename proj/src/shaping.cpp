#include "emctl/shaping.hpp"

#include <algorithm>
#include <cmath>

#include "emctl/errors.hpp"

namespace emctl {

ShapingFunction quadratic_shaping(ShapingFunction::Arity arity, const Matrix& gain,
                                  std::function<Vector(double)> center,
                                  bool time_varying) {
  linalg::require_square(gain, "shaping gain");
  ShapingFunction f;
  f.arity = arity;
  f.time_varying = time_varying;
  f.kind = "quadratic";
  f.gain = 0.5 * (gain + gain.transpose());
  f.center = std::move(center);
  const Matrix k = f.gain;
  auto c = f.center;
  f.value = [k, c](const Vector& y, double t) {
    const Vector e = y - c(t);
    return 0.5 * e.dot(k * e);
  };
  f.gradient = [k, c](const Vector& y, double t) { return Vector(k * (y - c(t))); };
  f.hessian = [k](const Vector&, double) { return k; };
  return f;
}

ShapingFunction cubic_shaping(const Vector& weights) {
  ShapingFunction f;
  f.arity = ShapingFunction::Arity::electrical;
  f.kind = "cubic";
  const Vector w = weights;
  f.value = [w](const Vector& y, double) {
    return (w.array() * y.array().cube()).sum() / 3.0;
  };
  f.gradient = [w](const Vector& y, double) {
    return Vector((w.array() * y.array().square()).matrix());
  };
  f.hessian = [w](const Vector& y, double) {
    return Matrix((2.0 * w.array() * y.array()).matrix().asDiagonal());
  };
  return f;
}

double shaping_consistency_error(const ShapingFunction& f, const Vector& y,
                                 double t, const Vector& scale) {
  if (!f.value || !f.gradient || !f.hessian) {
    throw ConfigurationError("shaping function lacks value/gradient/Hessian");
  }
  const Eigen::Index n = y.size();
  const Vector g = f.gradient(y, t);
  const Matrix h = f.hessian(y, t);
  Vector fd_g(n);
  Matrix fd_h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double natural = std::abs(h(i, i)) > 0.0 ? std::abs(g(i)) / std::abs(h(i, i)) : 0.0;
    const double s = 1e-4 * std::max({std::abs(y(i)), scale(i), natural});
    Vector yp = y, ym = y;
    yp(i) += s;
    ym(i) -= s;
    fd_g(i) = (f.value(yp, t) - f.value(ym, t)) / (2 * s);
    fd_h.col(i) = (f.gradient(yp, t) - f.gradient(ym, t)) / (2 * s);
  }
  // Absolute floor from the magnitudes of the compared quantities.
  const double gs = std::max({g.norm(), fd_g.norm(), 1e-300});
  const double hs = std::max({h.norm(), fd_h.norm(), 1e-300});
  return std::max((g - fd_g).norm() / gs, (h - fd_h).norm() / hs);
}

}  // namespace emctl
