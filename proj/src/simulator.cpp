#include "emctl/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "emctl/errors.hpp"

namespace emctl {

namespace {

Vector reference_point(const EMPlant& plant) {
  Vector q = Vector::Zero(plant.n_m);
  for (int i = 0; i < plant.n_m; ++i) {
    const double lo = plant.q_lower(i), hi = plant.q_upper(i);
    if (q(i) > lo && q(i) < hi) continue;
    if (std::isfinite(lo) && std::isfinite(hi)) {
      q(i) = 0.5 * (lo + hi);
    } else if (std::isfinite(lo)) {
      q(i) = lo + plant.state_scale(i);
    } else {
      q(i) = hi - plant.state_scale(i);
    }
  }
  return q;
}

SimRecord from_result(const IntegrationResult& r, const EMPlant& plant) {
  SimRecord rec;
  rec.times = r.times;
  rec.states = r.states;
  rec.diagnostics = r.diagnostics;
  rec.aborted = r.aborted;
  rec.abort_time = r.abort_time;
  rec.abort_reason = r.abort_reason;
  rec.n_m = plant.n_m;
  rec.n_e = plant.n_e;
  return rec;
}

void fill_errors(SimRecord& rec, const DesiredTarget& target) {
  for (std::size_t k = 0; k < rec.size(); ++k) {
    const Vector e = rec.states[k] - target.state(rec.times[k]);
    rec.error_norms.push_back(e.norm());
    rec.errors.push_back(e);
  }
}

}  // namespace

IntegratorConfig default_integrator(const EMPlant& plant, double horizon) {
  IntegratorConfig cfg;
  cfg.horizon = horizon;
  cfg.scale = plant.state_scale;
  const Vector q = reference_point(plant);
  const Matrix psi = plant.elastance(q);
  const double electrical = ((plant.J_e - plant.R_e) * psi).norm();
  const Matrix m = plant.mass(q);
  const double mech_stiffness = plant.potential_hessian ? plant.potential_hessian(q).norm() : 0.0;
  const double mechanical =
      std::sqrt(mech_stiffness / linalg::min_symmetric_eigenvalue(m)) + 1.0 / horizon;
  cfg.method = electrical > 1e3 * mechanical ? IntegrationMethod::implicit_rk
                                             : IntegrationMethod::explicit_rk;
  return cfg;
}

SimRecord simulate(const ControllerLaw& law, const Vector& eta0, const IntegratorConfig& config) {
  const EMPlant& plant = law.plant();
  if (eta0.size() != plant.state_size()) throw DimensionError("initial state has wrong size");
  require_in_bounds(plant, eta0.head(plant.n_m));
  if (!law.cleared()) law.input(eta0, 0.0);  // throws RefusalError with the failed conditions

  const OdeRhs rhs = [&law](double t, const Vector& eta) { return law.closed_loop_field(eta, t); };
  SimRecord rec = from_result(integrate(rhs, eta0, config), plant);
  for (std::size_t k = 0; k < rec.size(); ++k) {
    rec.inputs.push_back(law.raw_input(rec.states[k], rec.times[k]));
    rec.desired_energy.push_back(law.desired_energy(rec.states[k], rec.times[k]));
  }
  fill_errors(rec, law.target());
  return rec;
}

SimRecord simulate_open_loop(const EMPlant& plant, const std::function<Vector(double)>& u,
                             const Vector& eta0, const IntegratorConfig& config,
                             const std::optional<DesiredTarget>& reference) {
  if (eta0.size() != plant.state_size()) throw DimensionError("initial state has wrong size");
  require_in_bounds(plant, eta0.head(plant.n_m));
  const OdeRhs rhs = [&plant, &u](double t, const Vector& eta) {
    return open_loop_field(plant, eta, u(t));
  };
  SimRecord rec = from_result(integrate(rhs, eta0, config), plant);
  for (std::size_t k = 0; k < rec.size(); ++k) rec.inputs.push_back(u(rec.times[k]));
  if (reference) fill_errors(rec, *reference);
  return rec;
}

}  // namespace emctl
