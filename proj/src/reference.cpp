#include "emctl/reference.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "emctl/errors.hpp"

namespace emctl {
namespace {

void require_scalar_plant(const EMPlant& plant) {
  if (plant.n_m != 1 || plant.n_e != 1 || plant.mass_derivative) {
    throw ConfigurationError(
        "feedforward generation supports scalar plants with constant mass only");
  }
}

struct ForceBalance {
  double n, dn, d, dd;
};

ForceBalance force_balance(const EMPlant& plant, const std::array<double, 4>& r) {
  const Vector q = Vector::Constant(1, r[0]);
  require_in_bounds(plant, q);
  const double m = plant.mass(q)(0, 0);
  const double rm = plant.R_m(0, 0);
  ForceBalance fb;
  fb.n = m * r[2] + rm * r[1] + potential_gradient(plant, q)(0);
  fb.dn = m * r[3] + rm * r[2] + potential_hessian(plant, q)(0, 0) * r[1];
  fb.d = -elastance_derivative(plant, q, 0)(0, 0);
  fb.dd = -elastance_second_derivative(plant, q, 0, 0)(0, 0) * r[1];
  return fb;
}

}  // namespace

std::array<double, 4> MotionProfile::derivatives(double t) const {
  if (kind == Kind::constant) return {offset, 0.0, 0.0, 0.0};
  const double a = omega * t + phase;
  const double s = std::sin(a), c = std::cos(a);
  const double w = omega;
  return {offset + amplitude * s, amplitude * w * c, -amplitude * w * w * s,
          -amplitude * w * w * w * c};
}

double MotionProfile::period() const {
  if (kind == Kind::constant || omega == 0.0) return 0.0;
  return 2.0 * std::numbers::pi / std::abs(omega);
}

double feedforward_radicand(const EMPlant& plant, double q, double dq, double ddq) {
  require_scalar_plant(plant);
  const ForceBalance fb = force_balance(plant, {q, dq, ddq, 0.0});
  return fb.n / fb.d;
}

DesiredTarget make_reference(const EMPlant& plant, const MotionProfile& profile,
                             double horizon, int check_samples) {
  require_scalar_plant(plant);
  if (!(horizon >= 0.0) || check_samples < 1) {
    throw ConfigurationError("reference horizon must be nonnegative");
  }
  for (int i = 0; i <= check_samples; ++i) {
    const double t = horizon * i / check_samples;
    const auto r = profile.derivatives(t);
    if (!plant.q_in_bounds(Vector::Constant(1, r[0]))) {
      std::ostringstream os;
      os << "reference leaves the plant domain at t=" << t << " (q=" << r[0] << ")";
      throw InfeasibleError(os.str());
    }
    const ForceBalance fb = force_balance(plant, r);
    if (!(fb.n / fb.d > 0.0)) {
      std::ostringstream os;
      os << "feedforward radicand is nonpositive at t=" << t << " (" << fb.n / fb.d
         << "); the reference is not feasible";
      throw InfeasibleError(os.str());
    }
  }

  const EMPlant p = plant;
  DesiredTarget target;
  target.kind = profile.kind == MotionProfile::Kind::constant
                    ? DesiredTarget::Kind::equilibrium
                    : DesiredTarget::Kind::trajectory;
  target.state = [p, profile](double t) {
    const auto r = profile.derivatives(t);
    const ForceBalance fb = force_balance(p, r);
    const double m = p.mass(Vector::Constant(1, r[0]))(0, 0);
    Vector eta(3);
    eta << r[0], m * r[1], std::sqrt(2.0 * fb.n / fb.d);
    return eta;
  };
  target.rate = [p, profile](double t) {
    const auto r = profile.derivatives(t);
    const ForceBalance fb = force_balance(p, r);
    const double m = p.mass(Vector::Constant(1, r[0]))(0, 0);
    const double x = std::sqrt(2.0 * fb.n / fb.d);
    const double dratio = fb.dn / fb.d - fb.n * fb.dd / (fb.d * fb.d);
    Vector rate(3);
    rate << r[1], m * r[2], dratio / x;
    return rate;
  };
  std::ostringstream os;
  if (profile.kind == MotionProfile::Kind::constant) {
    os << "q* = " << profile.offset;
  } else {
    os << "q* = " << profile.offset << " + " << profile.amplitude << " sin("
       << profile.omega << " t + " << profile.phase << ")";
  }
  target.description = os.str();
  return target;
}

DesiredTarget make_equilibrium_target(const EMPlant& plant, const Vector& q_d) {
  if (q_d.size() != 1) {
    throw ConfigurationError("equilibrium feedforward supports scalar plants only");
  }
  MotionProfile profile;
  profile.offset = q_d(0);
  return make_reference(plant, profile, 0.0, 1);
}

}  // namespace emctl
