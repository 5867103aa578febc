#include "emctl/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <type_traits>

#include "emctl/errors.hpp"

namespace emctl {

std::string to_string(IntegrationMethod method) {
  switch (method) {
    case IntegrationMethod::explicit_rk: return "dopri5";
    case IntegrationMethod::implicit_rk: return "radau5";
  }
  return "unknown";
}

IntegrationMethod integration_method_from_string(const std::string& name) {
  if (name == "dopri5" || name == "explicit") return IntegrationMethod::explicit_rk;
  if (name == "radau5" || name == "implicit") return IntegrationMethod::implicit_rk;
  throw ConfigurationError("unknown integration method '" + name + "'");
}

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigurationError("tolerances must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigurationError("horizon must be positive and finite");
  }
  if (output_samples < 2) throw ConfigurationError("output_samples must be at least 2");
  if (max_step < 0.0 || min_step < 0.0) throw ConfigurationError("step limits must be non-negative");
  if (!(effective_min_step() < effective_max_step())) {
    throw ConfigurationError("min_step must be smaller than max_step");
  }
  if (scale.size() > 0 && (scale.array() <= 0.0).any()) {
    throw ConfigurationError("state scale entries must be positive");
  }
}

double IntegratorConfig::effective_max_step() const {
  return max_step > 0.0 ? max_step : horizon / 50.0;
}

double IntegratorConfig::effective_min_step() const {
  return min_step > 0.0 ? min_step : 1e-14 * horizon;
}

namespace {

struct Context {
  const OdeRhs& rhs;
  const IntegratorConfig& config;
  Vector abs_weight;
  StepDiagnostics& diag;

  Vector f(double t, const Vector& y) {
    ++diag.rhs_evaluations;
    Vector out = rhs(t, y);
    if (out.size() != y.size()) throw DimensionError("right-hand side has wrong dimension");
    return out;
  }

  double norm(const Vector& e, const Vector& y0, const Vector& y1) const {
    const Vector w = abs_weight.array() +
                     config.rel_tol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array();
    return std::sqrt((e.array() / w.array()).square().mean());
  }
};

enum class Outcome { ok, domain, newton_failure, non_finite };

struct Attempt {
  Outcome outcome = Outcome::ok;
  Vector y;
  double err = 0.0;
};

// Dormand–Prince 5(4) with FSAL.
class DormandPrince {
 public:
  static constexpr double order = 5.0;

  void reset(Context& ctx, double t, const Vector& y) { k1_ = ctx.f(t, y); }

  Attempt attempt(Context& ctx, double t, const Vector& y, double h) {
    static constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45,
                            a42 = -56.0 / 15, a43 = 32.0 / 9, a51 = 19372.0 / 6561,
                            a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729,
                            a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656, b1 = 35.0 / 384,
                            b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84, e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                            e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                            e7 = -1.0 / 40;
    Attempt out;
    try {
      const Vector k2 = ctx.f(t + h / 5, y + h * a21 * k1_);
      const Vector k3 = ctx.f(t + 3 * h / 10, y + h * (a31 * k1_ + a32 * k2));
      const Vector k4 = ctx.f(t + 4 * h / 5, y + h * (a41 * k1_ + a42 * k2 + a43 * k3));
      const Vector k5 =
          ctx.f(t + 8 * h / 9, y + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
      const Vector k6 =
          ctx.f(t + h, y + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      out.y = y + h * (b1 * k1_ + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      if (!out.y.allFinite()) {
        out.outcome = Outcome::non_finite;
        return out;
      }
      k7_ = ctx.f(t + h, out.y);
      const Vector e = h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7_);
      out.err = ctx.norm(e, y, out.y);
      if (!std::isfinite(out.err)) out.outcome = Outcome::non_finite;
    } catch (const DomainError&) {
      out.outcome = Outcome::domain;
    }
    return out;
  }

  void accept() { k1_ = k7_; }

  const Vector& slope() const { return k1_; }

 private:
  Vector k1_, k7_;
};

// 3-stage Radau IIA; simplified Newton with a finite-difference Jacobian;
// local error from comparing one step against two half steps.
class RadauIIA {
 public:
  static constexpr double order = 6.0;

  RadauIIA() {
    const double s6 = std::sqrt(6.0);
    c_ << (4 - s6) / 10, (4 + s6) / 10, 1.0;
    a_ << (88 - 7 * s6) / 360, (296 - 169 * s6) / 1800, (-2 + 3 * s6) / 225,
        (296 + 169 * s6) / 1800, (88 + 7 * s6) / 360, (-2 - 3 * s6) / 225, (16 - s6) / 36,
        (16 + s6) / 36, 1.0 / 9;
  }

  void reset(Context&, double, const Vector&) { jac_valid_ = false; }

  Attempt attempt(Context& ctx, double t, const Vector& y, double h) {
    Attempt out;
    try {
      if (!jac_valid_) {
        jacobian(ctx, t, y);
        jac_valid_ = true;
      }
      Vector full, half, second;
      Outcome o = solve(ctx, t, y, h, full);
      if (o == Outcome::ok) o = solve(ctx, t, y, h / 2, half);
      if (o == Outcome::ok) o = solve(ctx, t + h / 2, half, h / 2, second);
      if (o != Outcome::ok) {
        out.outcome = o;
        return out;
      }
      out.y = second;
      out.err = ctx.norm(second - full, y, second);
      if (!std::isfinite(out.err)) out.outcome = Outcome::non_finite;
    } catch (const DomainError&) {
      out.outcome = Outcome::domain;
    }
    return out;
  }

  void accept() { jac_valid_ = false; }
  void invalidate() { jac_valid_ = false; }

 private:
  void jacobian(Context& ctx, double t, const Vector& y) {
    ++ctx.diag.jacobian_evaluations;
    const int n = static_cast<int>(y.size());
    const Vector f0 = ctx.f(t, y);
    jac_.resize(n, n);
    for (int j = 0; j < n; ++j) {
      const double delta = std::sqrt(std::numeric_limits<double>::epsilon()) *
                           std::max(std::abs(y(j)), ctx.abs_weight(j) / ctx.config.abs_tol);
      Vector yp = y;
      yp(j) += delta;
      Vector fp;
      try {
        fp = ctx.f(t, yp);
        jac_.col(j) = (fp - f0) / delta;
      } catch (const DomainError&) {
        yp(j) = y(j) - delta;
        jac_.col(j) = (f0 - ctx.f(t, yp)) / delta;
      }
    }
  }

  Outcome solve(Context& ctx, double t, const Vector& y, double h, Vector& y_new) {
    const int n = static_cast<int>(y.size());
    Matrix m = Matrix::Identity(3 * n, 3 * n);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m.block(i * n, j * n, n, n) -= h * a_(i, j) * jac_;
    }
    const Eigen::PartialPivLU<Matrix> lu(m);
    Vector z = Vector::Zero(3 * n);
    double previous = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 12; ++iter) {
      Vector fz(3 * n);
      for (int i = 0; i < 3; ++i) fz.segment(i * n, n) = ctx.f(t + c_(i) * h, y + z.segment(i * n, n));
      Vector g = z;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) g.segment(i * n, n) -= h * a_(i, j) * fz.segment(j * n, n);
      }
      const Vector dz = -lu.solve(g);
      if (!dz.allFinite()) return Outcome::non_finite;
      z += dz;
      double size = 0.0;
      for (int i = 0; i < 3; ++i) size = std::max(size, ctx.norm(dz.segment(i * n, n), y, y));
      if (size < 1e-3) {
        y_new = y + z.segment(2 * n, n);
        return y_new.allFinite() ? Outcome::ok : Outcome::non_finite;
      }
      if (iter >= 2 && size > 0.9 * previous) break;
      previous = size;
    }
    ++ctx.diag.newton_failures;
    return Outcome::newton_failure;
  }

  Eigen::Vector3d c_;
  Eigen::Matrix3d a_;
  Matrix jac_;
  bool jac_valid_ = false;
};

template <typename Stepper>
IntegrationResult run(Stepper& stepper, const OdeRhs& rhs, const Vector& y0,
                      const IntegratorConfig& config) {
  IntegrationResult result;
  auto& diag = result.diagnostics;
  const int n = static_cast<int>(y0.size());
  const Vector scale = config.scale.size() == n ? config.scale : Vector::Ones(n);
  Context ctx{rhs, config, config.abs_tol * scale, diag};

  const double horizon = config.horizon;
  const double h_max = config.effective_max_step();
  const double h_min = config.effective_min_step();
  const int samples = config.output_samples;
  auto grid_time = [&](int k) { return k == samples - 1 ? horizon : horizon * k / (samples - 1); };

  double t = 0.0;
  Vector y = y0;
  result.times.push_back(0.0);
  result.states.push_back(y0);

  try {
    stepper.reset(ctx, t, y);
  } catch (const DomainError& e) {
    result.aborted = true;
    result.abort_reason = e.what();
    return result;
  }
  // Initial step from the derivative magnitude.
  double h;
  {
    const Vector f0 = ctx.f(t, y);
    const double d0 = ctx.norm(y, y, y), d1 = ctx.norm(f0, y, y);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * horizon : 0.01 * d0 / d1;
    h = std::clamp(h, h_min * 10, h_max);
  }
  diag.smallest_step = std::numeric_limits<double>::infinity();

  int next = 1;
  while (next < samples) {
    const double t_out = grid_time(next);
    const double nominal = std::min(h, h_max);
    double step = nominal;
    bool lands = false;
    if (t + step >= t_out - 1e-12 * horizon) {
      step = t_out - t;
      lands = true;
    }
    Attempt a = stepper.attempt(ctx, t, y, step);
    if (a.outcome == Outcome::domain) {
      ++diag.domain_rejections;
      ++diag.rejected;
      h = step * 0.25;
      if (h < h_min) {
        // An Euler probe of length h_min separates a real exit from unstable trial stages.
        bool at_edge = false;
        try {
          ctx.f(t + h_min, y + h_min * ctx.f(t, y));
        } catch (const DomainError&) {
          at_edge = true;
        }
        std::ostringstream os;
        if (!at_edge) {
          os << "step size underflow at t = " << t << " (h = " << h
             << ", trial stages leave the domain)";
          if (config.method == IntegrationMethod::explicit_rk) {
            os << "; the problem looks stiff, use the implicit method (radau5)";
          }
          throw StiffnessError(os.str(), t);
        }
        os << "state left the model domain near t = " << t;
        result.aborted = true;
        result.abort_time = t;
        result.abort_reason = os.str();
        return result;
      }
      continue;
    }
    if (a.outcome != Outcome::ok || a.err > 1.0) {
      ++diag.rejected;
      const double fac = a.outcome == Outcome::ok
                             ? std::max(0.2, 0.9 * std::pow(a.err, -1.0 / Stepper::order))
                             : 0.25;
      h = step * std::min(fac, 0.9);
      if constexpr (std::is_same_v<Stepper, RadauIIA>) stepper.invalidate();
      if (h < h_min) {
        std::ostringstream os;
        os << "step size underflow at t = " << t << " (h = " << h << ")";
        if (config.method == IntegrationMethod::explicit_rk) {
          os << "; the problem looks stiff, use the implicit method (radau5)";
        }
        throw StiffnessError(os.str(), t);
      }
      continue;
    }
    ++diag.accepted;
    diag.smallest_step = std::min(diag.smallest_step, step);
    diag.largest_step = std::max(diag.largest_step, step);
    t = lands ? t_out : t + step;
    y = a.y;
    stepper.accept();
    const double fac = std::clamp(0.9 * std::pow(std::max(a.err, 1e-10), -1.0 / Stepper::order),
                                  0.2, 5.0);
    h = step * fac;
    if (lands) {
      h = std::max(h, nominal);
      result.times.push_back(t);
      result.states.push_back(y);
      ++next;
    }
  }
  return result;
}

}  // namespace

IntegrationResult integrate(const OdeRhs& rhs, const Vector& y0, const IntegratorConfig& config) {
  config.validate();
  if (config.scale.size() != 0 && config.scale.size() != y0.size()) {
    throw DimensionError("state scale has wrong dimension");
  }
  if (!y0.allFinite()) throw ConfigurationError("initial state must be finite");
  if (config.method == IntegrationMethod::explicit_rk) {
    DormandPrince stepper;
    return run(stepper, rhs, y0, config);
  }
  RadauIIA stepper;
  return run(stepper, rhs, y0, config);
}

}  // namespace emctl
