#include "emctl/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "emctl/errors.hpp"

namespace emctl {

namespace {

using Status = ConditionStatus;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Condition make_condition(std::string name, std::string description, bool ok, double margin,
                         std::string detail = {}) {
  return Condition{std::move(name), std::move(description), ok ? Status::pass : Status::fail,
                   margin, std::move(detail)};
}

Condition definite(std::string name, std::string description, const Matrix& a, bool strict) {
  const double lmin = linalg::min_symmetric_eigenvalue(a);
  const bool ok = strict ? linalg::is_positive_definite(a) : linalg::is_positive_semidefinite(a);
  return make_condition(std::move(name), std::move(description), ok, lmin,
                        "min eigenvalue " + fmt(lmin));
}

Condition below(std::string name, std::string description, double value, double tol) {
  return make_condition(std::move(name), std::move(description), value <= tol, tol - value,
                        "relative residual " + fmt(value));
}

double scaled_max(const Vector& r, const Vector& scale) {
  double worst = 0.0;
  for (int i = 0; i < r.size(); ++i) {
    worst = std::max(worst, std::abs(r(i)) / std::max(scale(i), 1e-300));
  }
  return worst;
}

struct Sample {
  Vector eta;
  double t;
};

// Evenly thinned region grid crossed with the region times.
std::vector<Sample> identity_samples(const SamplingRegion& region, int cap) {
  const auto grid = region.grid();
  const std::size_t per_time =
      std::max<std::size_t>(1, static_cast<std::size_t>(cap) / region.times.size());
  const std::size_t stride = std::max<std::size_t>(1, grid.size() / per_time);
  std::vector<Sample> out;
  for (double t : region.times) {
    for (std::size_t k = 0; k < grid.size(); k += stride) out.push_back({grid[k], t});
  }
  return out;
}

std::vector<double> sample_times(double horizon, int n) {
  std::vector<double> ts;
  if (n <= 1 || horizon <= 0.0) return {0.0};
  for (int k = 0; k < n; ++k) ts.push_back(horizon * k / (n - 1));
  return ts;
}

Matrix select_blocks(const Matrix& h, const std::vector<int>& idx) {
  Matrix out(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = h(idx[i], idx[j]);
  }
  return out;
}

std::vector<int> range(int from, int count) {
  std::vector<int> r(count);
  for (int i = 0; i < count; ++i) r[i] = from + i;
  return r;
}

// Checks shared by every law.
void add_common(ConditionReport& report, const ControllerLaw& law,
                const std::vector<Sample>& samples) {
  const EMPlant& plant = law.plant();
  const int nm = plant.n_m, ne = plant.n_e;

  double law_field = 0.0;
  for (const auto& s : samples) law_field = std::max(law_field, law_field_mismatch(law, s.eta, s.t));
  report.conditions.push_back(below("law_field_consistency",
                                    "closed loop equals F_d grad H_d on sampled states",
                                    law_field, kIdentityTolerance));

  double shaping = 0.0;
  auto check = [&](const ShapingFunction& f) {
    for (std::size_t k = 0; k < samples.size(); k += std::max<std::size_t>(1, samples.size() / 50)) {
      const auto& s = samples[k];
      const Vector q = s.eta.head(nm), x = s.eta.tail(ne);
      const Vector y = f.arity == ShapingFunction::Arity::z ? z_map(law.shape(), plant, q, x) : x;
      const Vector scale = f.arity == ShapingFunction::Arity::z
                               ? Vector((law.shape().Rbar_e.cwiseAbs().diagonal().array().inverse() *
                                         plant.state_scale.tail(ne).array()).matrix())
                               : Vector(plant.state_scale.tail(ne));
      shaping = std::max(shaping, shaping_consistency_error(f, y, s.t, scale));
    }
  };
  check(law.primary());
  if (law.auxiliary()) check(*law.auxiliary());
  report.conditions.push_back(below("shaping_consistency",
                                    "shaping gradients and Hessians match finite differences",
                                    shaping, kShapingTolerance));

  if (plant.uses_finite_differences()) {
    report.conditions.push_back({"plant_derivatives",
                                 "plant derivatives come from finite differences",
                                 Status::assumed, 0.0, "analytic callbacks missing"});
  }
}

void add_matching(ConditionReport& report, const ControllerLaw& law,
                  const std::vector<Sample>& samples) {
  double worst = 0.0;
  for (const auto& s : samples) worst = std::max(worst, matching_mismatch(law, s.eta, s.t));
  report.conditions.push_back(below("matching_identity",
                                    "-grad_q H_d + Gamma grad_x H_d + grad_q H = 0 on samples",
                                    worst, kIdentityTolerance));
}

void add_gain_conditions(ConditionReport& report, const ControllerLaw& law, bool ke_strict) {
  const auto& shape = law.shape();
  report.conditions.push_back(definite(ke_strict ? "K_e_positive_definite" : "K_e_positive_semidefinite",
                                       ke_strict ? "K_e > 0" : "K_e >= 0", shape.K_e, ke_strict));
  const Matrix a = law.plant().J_e - shape.Rbar_e;
  const Eigen::JacobiSVD<Matrix> svd(a);
  const double smin = svd.singularValues().minCoeff();
  report.conditions.push_back(make_condition("electrical_operator_invertible",
                                             "J_e - Rbar_e invertible", smin > 0.0, smin,
                                             "min singular value " + fmt(smin)));
}

void add_ph_condition(ConditionReport& report, const ControllerLaw& law, bool strict) {
  const auto& plant = law.plant();
  const auto& shape = law.shape();
  const std::string name = strict ? "ph_structure_strict" : "ph_structure";
  const std::string description = strict ? "R_m - 1/4 D_d^T Rbar_e^-1 D_d > 0"
                                         : "R_m - 1/4 D_d^T Rbar_e^-1 D_d >= 0";
  if (!linalg::is_positive_definite(shape.Rbar_e)) {
    report.conditions.push_back(make_condition(name, description, false,
                                               linalg::min_symmetric_eigenvalue(shape.Rbar_e),
                                               "Rbar_e is not positive definite"));
    return;
  }
  report.conditions.push_back(
      definite(name, description, linalg::ph_structure_schur(plant.R_m, shape.D_d, shape.Rbar_e),
               strict));
}

void add_equilibrium_conditions(ConditionReport& report, const ControllerLaw& law) {
  const auto eq = assignable_equilibrium_check(law.plant(), law.target().state(0.0));
  report.conditions.push_back(make_condition(
      "target_assignable", "grad_q H(eta_d) = 0 and p_d = 0", eq.assignable,
      eq.assignable ? 1.0 : -eq.residual, "residual " + fmt(eq.residual)));
}

// (q, x_e) block of ∇²H_d at the target.
Condition target_hessian_block(const ControllerLaw& law, const std::string& name,
                               const std::string& description) {
  const int nm = law.plant().n_m, ne = law.plant().n_e;
  std::vector<int> idx = range(0, nm);
  for (int i : range(2 * nm, ne)) idx.push_back(i);
  const Matrix h = law.desired_hessian(law.target().state(0.0), 0.0);
  return definite(name, description, select_blocks(h, idx), true);
}

void add_regulation1(ConditionReport& report, const ControllerLaw& law,
                     const std::vector<Sample>& samples) {
  const EMPlant& plant = law.plant();
  const int nm = plant.n_m, ne = plant.n_e;
  const Vector eta_d = law.target().state(0.0);
  const StateView s = split_state(plant, eta_d);
  report.conditions.push_back(definite("mechanical_damping", "R_m > 0", plant.R_m, true));
  const Matrix h = hessian_hamiltonian(plant, eta_d);
  report.conditions.push_back(definite("mechanical_convexity", "grad_q^2 H(eta_d) > 0",
                                       h.topLeftCorner(nm, nm), true));
  add_gain_conditions(report, law, false);
  add_ph_condition(report, law, true);

  const Vector psi_x = plant.elastance(s.q) * s.x;
  const Vector grad_phi = law.primary().gradient(s.x, 0.0);
  const double cancel = scaled_max(psi_x + grad_phi, psi_x.cwiseAbs() + grad_phi.cwiseAbs());
  report.conditions.push_back(below("shaping_gradient_cancellation",
                                    "grad_x H_e(q_d, x_d) + grad Phi(x_d) = 0", cancel,
                                    kIdentityTolerance));
  report.conditions.push_back(target_hessian_block(
      law, "shaped_hessian_block", "[[grad_q^2 H, Upsilon],[Upsilon^T, Psi + grad^2 Phi]] > 0"));
  add_equilibrium_conditions(report, law);
  add_common(report, law, samples);
  (void)ne;
}

void add_regulation2(ConditionReport& report, const ControllerLaw& law,
                     const std::vector<Sample>& samples) {
  const EMPlant& plant = law.plant();
  const auto& shape = law.shape();
  const int nm = plant.n_m, ne = plant.n_e;
  const Vector eta_d = law.target().state(0.0);
  const StateView s = split_state(plant, eta_d);
  const ShapingFunction& phi = *law.auxiliary();

  std::vector<Vector> states;
  for (const auto& smp : samples) states.push_back(smp.eta);
  states.push_back(eta_d);
  report.conditions.push_back(below("coupling_linear_in_q", "grad_q H_e = -Gamma grad phi",
                                    coupling_linearity_residual(plant, shape, phi, states),
                                    kCouplingTolerance));
  report.conditions.push_back(definite("auxiliary_convexity", "grad^2 phi(x_d) > 0",
                                       phi.hessian(s.x, 0.0), true));
  add_gain_conditions(report, law, false);
  add_ph_condition(report, law, false);

  const Vector z_d = z_map(shape, plant, s.q, s.x);
  const Vector gx = z_gradient_to_x(plant, shape, law.primary().gradient(z_d, 0.0));
  const Vector gphi = phi.gradient(s.x, 0.0);
  const Vector gv = potential_gradient(plant, s.q);
  const Vector gq = shape.Gamma * gx;
  report.conditions.push_back(below("stationarity_q", "grad V(q_d) + grad_q Phi(z_d) = 0",
                                    scaled_max(gv + gq, gv.cwiseAbs() + gq.cwiseAbs()),
                                    kIdentityTolerance));
  report.conditions.push_back(below("stationarity_x", "grad_x Phi(z_d) + grad phi(x_d) = 0",
                                    scaled_max(gx + gphi, gx.cwiseAbs() + gphi.cwiseAbs()),
                                    kIdentityTolerance));
  report.conditions.push_back(target_hessian_block(
      law, "shaped_hessian_block",
      "[[grad_q^2 H + grad_q^2 Phi, Upsilon],[Upsilon^T, grad_x^2 Phi + grad^2 phi]] > 0"));
  add_equilibrium_conditions(report, law);
  report.conditions.push_back({"detectability",
                               "output detectability of the closed loop for asymptotic stability",
                               Status::assumed, 0.0, "not decidable numerically; see simulation"});
  add_matching(report, law, samples);
  add_common(report, law, samples);
  (void)nm;
  (void)ne;
}

void add_contraction(ConditionReport& report, const ControllerLaw& law,
                     const SamplingRegion& region, const std::vector<double>& eps_grid,
                     const std::string& band_name, const std::string& q_name) {
  const HessianEvaluator hess = [&law](const Vector& eta, double t) {
    return law.desired_hessian(eta, t);
  };
  const auto cert = certify_constant_metric(law.closed_loop_structure(), hess, region, eps_grid);
  report.conditions.push_back(make_condition(
      "closed_loop_hurwitz", "F_d Hurwitz", cert.hurwitz_ok, cert.hurwitz_margin,
      "max real part " + fmt(-cert.hurwitz_margin)));
  report.conditions.push_back(make_condition(
      band_name, "band gamma1 I < grad^2 H_d < gamma2 I over the region", cert.band_ok,
      cert.band.raw_min,
      "gamma1 " + fmt(cert.gamma1) + ", gamma2 " + fmt(cert.gamma2) + " over " +
          std::to_string(cert.band.samples) + " samples"));
  if (cert.band_ok) {
    EpsSweepPoint best = cert.eps_sweep.front();
    for (const auto& p : cert.eps_sweep) {
      if (p.margin > best.margin) best = p;
    }
    report.conditions.push_back(make_condition(
        q_name, "Q has no imaginary-axis eigenvalues for some eps", cert.q_ok, cert.Q_margin,
        "best eps " + fmt(best.eps) + ", a = 1 - gamma1/gamma2 = " + fmt(cert.band.ratio_gap())));
  } else {
    report.conditions.push_back(make_condition(q_name, "Q has no imaginary-axis eigenvalues",
                                               false, 0.0, "band is not positive"));
  }
  report.constants["gamma1"] = cert.gamma1;
  report.constants["gamma2"] = cert.gamma2;
  report.constants["hessian_min"] = cert.band.raw_min;
  report.constants["hessian_max"] = cert.band.raw_max;
  report.constants["eps"] = cert.eps_found;
  report.constants["q_margin"] = cert.Q_margin;
  report.constants["hurwitz_margin"] = cert.hurwitz_margin;
  if (cert.omega) {
    report.constants["sigma"] = cert.sigma_estimate;
    report.constants["sigma_literal"] =
        linalg::convergence_rate_sigma_literal(*cert.omega, cert.gamma2, cert.eps_found);
  }
}

void add_feasibility(ConditionReport& report, const ControllerLaw& law,
                     const VerificationSettings& settings) {
  double worst = 0.0;
  for (double t : sample_times(settings.horizon, settings.feasibility_samples)) {
    worst = std::max(worst, trajectory_feasibility_mismatch(law, t));
  }
  report.conditions.push_back(below("trajectory_feasible",
                                    "target is a feasible closed-loop trajectory", worst,
                                    kFeasibilityTolerance));
}

void add_tracking1(ConditionReport& report, const ControllerLaw& law,
                   const SamplingRegion& region, const std::vector<Sample>& samples,
                   const VerificationSettings& settings) {
  const EMPlant& plant = law.plant();
  const int nm = plant.n_m;
  report.conditions.push_back(definite("mechanical_damping", "R_m > 0", plant.R_m, true));
  const HessianEvaluator mech = [&plant, nm](const Vector& eta, double) {
    return Matrix(hessian_hamiltonian(plant, eta).topLeftCorner(2 * nm, 2 * nm));
  };
  const auto band = hessian_band(mech, region);
  report.conditions.push_back(make_condition(
      "mechanical_band", "alpha I < [[grad_q^2 H, .], [., M^-1]] < beta I over the region",
      band.positive(), band.raw_min,
      "alpha " + fmt(band.gamma1) + ", beta " + fmt(band.gamma2)));
  report.constants["alpha"] = band.gamma1;
  report.constants["beta"] = band.gamma2;
  add_gain_conditions(report, law, false);
  const bool gamma_zero = law.shape().Gamma.isZero(0.0);
  report.conditions.push_back(make_condition("gamma_zero", "Gamma = 0", gamma_zero,
                                             gamma_zero ? 0.0 : -law.shape().Gamma.norm()));
  add_contraction(report, law, region, settings.eps_grid, "shaped_band", "n1_test");
  report.constants["alpha1"] = report.constants["gamma1"];
  report.constants["beta1"] = report.constants["gamma2"];
  add_feasibility(report, law, settings);
  add_common(report, law, samples);
}

void add_tracking2(ConditionReport& report, const ControllerLaw& law,
                   const SamplingRegion& region, const std::vector<Sample>& samples,
                   const VerificationSettings& settings) {
  const EMPlant& plant = law.plant();
  const auto& shape = law.shape();
  const int nm = plant.n_m, ne = plant.n_e;
  const ShapingFunction& phi = *law.auxiliary();
  std::vector<Vector> states;
  for (const auto& smp : samples) states.push_back(smp.eta);
  report.conditions.push_back(below("coupling_linear_in_q", "grad_q H_e = -Gamma grad phi",
                                    coupling_linearity_residual(plant, shape, phi, states),
                                    kCouplingTolerance));
  double worst = std::numeric_limits<double>::infinity();
  for (double t : sample_times(settings.horizon, settings.feasibility_samples)) {
    const Vector x = law.target().state(t).tail(ne);
    worst = std::min(worst, linalg::min_symmetric_eigenvalue(phi.hessian(x, t)));
  }
  report.conditions.push_back(make_condition(
      "auxiliary_convexity", "grad^2 phi(x*(t)) > 0 along the target",
      worst > linalg::kDefinitenessTolerance, worst, "min eigenvalue " + fmt(worst)));
  add_gain_conditions(report, law, true);
  add_contraction(report, law, region, settings.eps_grid, "shaped_band", "q_test");
  add_feasibility(report, law, settings);
  add_matching(report, law, samples);
  add_common(report, law, samples);
  (void)nm;
}

}  // namespace

double law_field_mismatch(const ControllerLaw& law, const Vector& eta, double t) {
  const Vector u = law.raw_input(eta, t);
  const Vector scale = field_term_scale(law.plant(), eta, u) +
                       law.closed_loop_structure().cwiseAbs() *
                           law.desired_gradient(eta, t).cwiseAbs();
  return scaled_max(law.closed_loop_field(eta, t) - law.target_field(eta, t), scale);
}

double matching_mismatch(const ControllerLaw& law, const Vector& eta, double t) {
  const EMPlant& plant = law.plant();
  const int nm = plant.n_m, ne = plant.n_e;
  const Vector gd = law.desired_gradient(eta, t);
  const StateView s = split_state(plant, eta);
  const Vector gh_pieces = potential_gradient(plant, s.q).cwiseAbs() +
                           coupling_energy_gradient_q(plant, s.q, s.x).cwiseAbs();
  const Vector gh = grad_hamiltonian(plant, eta).head(nm);
  const Vector gamma_gx = law.shape().Gamma * gd.tail(ne);
  const Vector r = -gd.head(nm) + gamma_gx + gh;
  const double scale = gd.head(nm).norm() + gamma_gx.norm() + gh_pieces.norm() + 1e-300;
  return r.norm() / scale;
}

double trajectory_feasibility_mismatch(const ControllerLaw& law, double t) {
  const Vector eta = law.target().state(t);
  const Vector rate = law.target().rate(t);
  const Vector u = law.raw_input(eta, t);
  const Vector r = rate - open_loop_field(law.plant(), eta, u);
  return scaled_max(r, rate.cwiseAbs() + field_term_scale(law.plant(), eta, u));
}

ConditionReport verify_conditions(const ControllerLaw& law, const VerificationSettings& settings) {
  ConditionReport report;
  report.law = law.kind();
  const SamplingRegion region =
      settings.region ? *settings.region
                      : region_around(law.plant(), law.target(), settings.horizon);
  region.validate();
  if (region.dimension() != law.plant().state_size()) {
    throw ConfigurationError("sampling region dimension does not match the plant state");
  }
  const auto samples = identity_samples(region, settings.max_identity_points);
  switch (law.kind()) {
    case LawKind::regulation1: add_regulation1(report, law, samples); break;
    case LawKind::regulation2: add_regulation2(report, law, samples); break;
    case LawKind::tracking1: add_tracking1(report, law, region, samples, settings); break;
    case LawKind::tracking2: add_tracking2(report, law, region, samples, settings); break;
  }
  return report;
}

VerifiedLaw verify_configuration(LawKind kind, const EMPlant& plant, const Matrix& gamma,
                                 const Matrix& d_d, const Matrix& k_e,
                                 const DesiredTarget& target, const ShapingChoice& shaping,
                                 const VerificationSettings& settings) {
  VerifiedLaw out;
  out.report.law = kind;
  try {
    const ClosedLoopShape shape = make_shape(plant, gamma, d_d, k_e);
    ControllerLaw law = make_controller(kind, plant, shape, target, shaping);
    out.report = verify_conditions(law, settings);
    law.attach_report(out.report, false);
    out.law = std::move(law);
  } catch (const ConfigurationError& e) {
    out.report.hard_failure = true;
    out.report.hard_failure_reason = e.what();
  } catch (const ModelMismatchError& e) {
    out.report.hard_failure = true;
    out.report.hard_failure_reason = e.what();
  } catch (const DefinitenessError& e) {
    out.report.hard_failure = true;
    out.report.hard_failure_reason = e.what();
  }
  return out;
}

}  // namespace emctl
