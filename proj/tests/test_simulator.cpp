#include <cmath>

#include <gtest/gtest.h>

#include "emctl/builtin_plants.hpp"
#include "emctl/errors.hpp"
#include "emctl/metrics.hpp"
#include "emctl/reference.hpp"
#include "emctl/simulator.hpp"
#include "emctl/verification.hpp"

using namespace emctl;

namespace {

Matrix s1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }
Vector v3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

ControllerLaw mems_law(double d_d, bool force = true) {
  const auto plant = make_mems_plant();
  const auto target = make_equilibrium_target(plant, v1(3e-5));
  const auto shape = make_shape(plant, s1(0), s1(d_d), s1(0));
  auto law = make_controller(LawKind::tracking1, plant, shape, target, {});
  ConditionReport report;
  report.law = LawKind::tracking1;
  report.conditions.push_back({"n1_test", "", ConditionStatus::fail, -1.0, ""});
  law.attach_report(report, force);
  return law;
}

IntegratorConfig scalar_config(IntegrationMethod method, double horizon = 1.0) {
  IntegratorConfig cfg;
  cfg.method = method;
  cfg.horizon = horizon;
  cfg.output_samples = 101;
  cfg.scale = v1(1.0);
  return cfg;
}

class BothMethods : public ::testing::TestWithParam<IntegrationMethod> {};

}  // namespace

// ---- integrators ----

TEST_P(BothMethods, ExponentialDecay) {
  const OdeRhs rhs = [](double, const Vector& y) { return Vector(-y); };
  const auto r = integrate(rhs, v1(1.0), scalar_config(GetParam()));
  ASSERT_EQ(r.times.size(), 101u);
  EXPECT_FALSE(r.aborted);
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    EXPECT_NEAR(r.states[k](0), std::exp(-r.times[k]), 1e-7) << k;
  }
}

TEST_P(BothMethods, HarmonicOscillator) {
  const OdeRhs rhs = [](double, const Vector& y) {
    Vector d(2);
    d << y(1), -y(0);
    return d;
  };
  auto cfg = scalar_config(GetParam(), 10.0);
  cfg.scale = Vector::Ones(2);
  Vector y0(2);
  y0 << 1.0, 0.0;
  const auto r = integrate(rhs, y0, cfg);
  EXPECT_NEAR(r.states.back()(0), std::cos(10.0), 1e-6);
  EXPECT_NEAR(r.states.back()(1), -std::sin(10.0), 1e-6);
}

TEST_P(BothMethods, NonautonomousRhs) {
  const OdeRhs rhs = [](double t, const Vector&) { return v1(std::cos(t)); };
  const auto r = integrate(rhs, v1(0.0), scalar_config(GetParam(), 2.0));
  EXPECT_NEAR(r.states.back()(0), std::sin(2.0), 1e-8);
}

INSTANTIATE_TEST_SUITE_P(Integrators, BothMethods,
                         ::testing::Values(IntegrationMethod::explicit_rk,
                                           IntegrationMethod::implicit_rk));

TEST(Integrator, OutputGridIsUniform) {
  const OdeRhs rhs = [](double, const Vector& y) { return Vector(-y); };
  auto cfg = scalar_config(IntegrationMethod::explicit_rk, 3.0);
  cfg.output_samples = 2000;
  const auto r = integrate(rhs, v1(1.0), cfg);
  ASSERT_EQ(r.times.size(), 2000u);
  EXPECT_EQ(r.times.front(), 0.0);
  EXPECT_EQ(r.times.back(), 3.0);
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    EXPECT_NEAR(r.times[k], 3.0 * k / 1999.0, 1e-15);
  }
}

TEST(Integrator, StiffProblemNeedsImplicitMethod) {
  const OdeRhs rhs = [](double t, const Vector& y) { return v1(-1e6 * (y(0) - std::cos(t))); };
  auto cfg = scalar_config(IntegrationMethod::implicit_rk);
  cfg.min_step = 1e-4;
  const auto r = integrate(rhs, v1(1.0), cfg);
  // Slow manifold y ≈ cos t + 1e-6 sin t.
  EXPECT_NEAR(r.states.back()(0), std::cos(1.0), 1e-5);

  cfg.method = IntegrationMethod::explicit_rk;
  try {
    integrate(rhs, v1(1.0), cfg);
    FAIL() << "expected StiffnessError";
  } catch (const StiffnessError& e) {
    EXPECT_NE(std::string(e.what()).find("radau5"), std::string::npos) << e.what();
    EXPECT_GE(e.time(), 0.0);
  }
}

TEST(Integrator, DomainErrorAbortsWithTruncatedRecord) {
  // ẏ = 1 leaves y < 0.5 at t = 0.5.
  const OdeRhs rhs = [](double, const Vector& y) {
    if (y(0) >= 0.5) throw DomainError("outside");
    return v1(1.0);
  };
  const auto r = integrate(rhs, v1(0.0), scalar_config(IntegrationMethod::explicit_rk));
  EXPECT_TRUE(r.aborted);
  EXPECT_NEAR(r.abort_time, 0.5, 1e-6);
  EXPECT_LT(r.times.size(), 101u);
  EXPECT_GE(r.times.size(), 50u);
  EXPECT_LE(r.times.back(), 0.5);
  EXPECT_GT(r.diagnostics.domain_rejections, 0);
  EXPECT_FALSE(r.abort_reason.empty());
}

TEST(Integrator, RejectsBadConfiguration) {
  const OdeRhs rhs = [](double, const Vector& y) { return Vector(-y); };
  auto cfg = scalar_config(IntegrationMethod::explicit_rk);
  cfg.horizon = -1;
  EXPECT_THROW(integrate(rhs, v1(1.0), cfg), ConfigurationError);
  cfg = scalar_config(IntegrationMethod::explicit_rk);
  cfg.output_samples = 1;
  EXPECT_THROW(integrate(rhs, v1(1.0), cfg), ConfigurationError);
  cfg = scalar_config(IntegrationMethod::explicit_rk);
  cfg.rel_tol = 0;
  EXPECT_THROW(integrate(rhs, v1(1.0), cfg), ConfigurationError);
  EXPECT_THROW(integration_method_from_string("euler"), ConfigurationError);
  EXPECT_EQ(integration_method_from_string("radau5"), IntegrationMethod::implicit_rk);
  EXPECT_EQ(integration_method_from_string("dopri5"), IntegrationMethod::explicit_rk);
}

// ---- simulator ----

TEST(Simulator, DefaultMethodFollowsStiffness) {
  EXPECT_EQ(default_integrator(make_mems_plant(), 0.05).method, IntegrationMethod::implicit_rk);
  EXPECT_EQ(default_integrator(make_maglev_plant(), 300.0).method, IntegrationMethod::explicit_rk);
}

TEST(Simulator, OpenLoopEquilibriumIsFixedPoint) {
  for (const auto& plant : {make_mems_plant(), make_maglev_plant()}) {
    const double q_d = plant.name == "maglev" ? 2.5e-3 : 3e-5;
    const auto target = make_equilibrium_target(plant, v1(q_d));
    const Vector eta_d = target.state(0.0);
    const Vector u = equilibrium_input(plant, eta_d);
    const double horizon = plant.name == "maglev" ? 1.0 : 0.01;
    const auto cfg = default_integrator(plant, horizon);
    const auto rec = simulate_open_loop(
        plant, [&u](double) { return u; }, eta_d, cfg, target);
    ASSERT_FALSE(rec.aborted);
    for (std::size_t k = 0; k < rec.size(); ++k) {
      for (int i = 0; i < 3; ++i) {
        ASSERT_LE(std::abs(rec.errors[k](i)), 1e-9 * plant.state_scale(i)) << plant.name << " " << k;
      }
    }
  }
}

TEST(Simulator, OpenLoopPassivity) {
  // dH/dt ≤ uᵀy pointwise and in the integral along a driven run.
  const auto plant = make_mems_plant();
  const auto target = make_equilibrium_target(plant, v1(3e-5));
  const Vector u_bar = equilibrium_input(plant, target.state(0.0));
  const auto u = [&](double t) { return Vector(u_bar * (1.0 + 0.5 * std::sin(500 * t))); };
  auto cfg = default_integrator(plant, 0.02);
  const auto rec = simulate_open_loop(plant, u, v3(1e-5, 0, 0), cfg);
  ASSERT_FALSE(rec.aborted);
  double supplied = 0, supplied_abs = 0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    const Vector g = grad_hamiltonian(plant, rec.states[k]);
    const Vector f = open_loop_field(plant, rec.states[k], rec.inputs[k]);
    const double power = rec.inputs[k].dot(output(plant, rec.states[k]));
    const double scale = (g.cwiseAbs().transpose() * field_term_scale(plant, rec.states[k], rec.inputs[k]));
    EXPECT_LE(g.dot(f) - power, 1e-12 * scale) << k;
    if (k > 0) {
      const double dt = rec.times[k] - rec.times[k - 1];
      const double pk = rec.inputs[k - 1].dot(output(plant, rec.states[k - 1]));
      supplied += 0.5 * dt * (pk + power);
      supplied_abs += 0.5 * dt * (std::abs(pk) + std::abs(power));
    }
  }
  const double dh = hamiltonian(plant, rec.states.back()) - hamiltonian(plant, rec.states.front());
  EXPECT_LE(dh, supplied + 1e-6 * supplied_abs);
}

TEST(Simulator, RefusesUncertifiedLaw) {
  const auto law = mems_law(-1.0, false);
  EXPECT_THROW(simulate(law, v3(1.5e-5, 0, 0), default_integrator(law.plant(), 0.05)),
               RefusalError);
}

TEST(Simulator, InitialStateChecks) {
  const auto law = mems_law(0.0);
  const auto cfg = default_integrator(law.plant(), 0.05);
  EXPECT_THROW(simulate(law, v1(0.0), cfg), DimensionError);
  EXPECT_THROW(simulate(law, v3(-20e-6, 0, 0), cfg), DomainError);
}

TEST(Simulator, MemsRegulationConvergesAndCoupledDampingRemovesRinging) {
  const auto cfg = default_integrator(make_mems_plant(), 0.05);
  const auto rec0 = simulate(mems_law(0.0), v3(1.5e-5, 0, 0), cfg);
  const auto rec1 = simulate(mems_law(-1.0), v3(1.5e-5, 0, 0), cfg);
  ASSERT_FALSE(rec0.aborted);
  ASSERT_FALSE(rec1.aborted);
  EXPECT_LT(std::abs(rec0.states.back()(0) - 3e-5), 0.01 * 3e-5);
  EXPECT_LT(std::abs(rec1.states.back()(0) - 3e-5), 0.01 * 3e-5);
  const auto m0 = compute_metrics(rec0);
  const auto m1 = compute_metrics(rec1);
  EXPECT_LT(m1.zero_crossings, m0.zero_crossings);
  EXPECT_EQ(m1.zero_crossings, 0);
  EXPECT_GT(m0.zero_crossings, 10);
}

TEST(Simulator, TighterToleranceAgrees) {
  auto cfg = default_integrator(make_mems_plant(), 0.02);
  const auto law = mems_law(0.0);
  const auto a = simulate(law, v3(1.5e-5, 0, 0), cfg);
  cfg.rel_tol = 1e-10;
  const auto b = simulate(law, v3(1.5e-5, 0, 0), cfg);
  ASSERT_EQ(a.size(), b.size());
  const Vector& s = law.plant().state_scale;
  double worst = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, (a.states[k] - b.states[k]).cwiseQuotient(s).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Simulator, DesiredEnergyDecreasesUnderRegulation) {
  const auto law = mems_law(0.0);
  const auto rec = simulate(law, v3(1.5e-5, 0, 0), default_integrator(law.plant(), 0.05));
  const double h_star = law.desired_energy(law.target().state(0.0), 0.0);
  const double h0 = rec.desired_energy.front() - h_star;
  ASSERT_GT(h0, 0.0);
  for (std::size_t k = 1; k < rec.size(); ++k) {
    EXPECT_LE(rec.desired_energy[k], rec.desired_energy[k - 1] + 1e-6 * h0 + 1e-13 * h_star) << k;
  }
  EXPECT_LT(rec.desired_energy.back() - h_star, 1e-3 * h0);
}

TEST(Simulator, RunsAreBitIdentical) {
  const auto law = mems_law(-1.0);
  const auto cfg = default_integrator(law.plant(), 0.01);
  const auto a = simulate(law, v3(1.5e-5, 0, 0), cfg);
  const auto b = simulate(law, v3(1.5e-5, 0, 0), cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_TRUE((a.states[k].array() == b.states[k].array()).all()) << k;
  }
}

TEST(Simulator, MaglevLeavingGapAbortsRun) {
  const auto plant = make_maglev_plant();
  auto cfg = default_integrator(plant, 1.0);
  const auto rec = simulate_open_loop(
      plant, [](double) { return v1(0.0); }, v3(2.5e-3, 0, 3.0), cfg);
  EXPECT_TRUE(rec.aborted);
  EXPECT_LT(rec.abort_time, 1.0);
  EXPECT_LT(rec.size(), 2000u);
  for (const auto& s : rec.states) EXPECT_LT(s(0), 0.005);
  EXPECT_EQ(rec.inputs.size(), rec.size());
}

// ---- metrics ----

TEST(Metrics, ExponentialOracle) {
  SimRecord rec;
  rec.n_m = 1;
  for (int k = 0; k < 2001; ++k) {
    const double t = 10.0 * k / 2000.0;
    rec.times.push_back(t);
    rec.states.push_back(v1(std::exp(-t)));
    rec.errors.push_back(v1(std::exp(-t)));
    rec.error_norms.push_back(std::exp(-t));
  }
  const auto m = compute_metrics(rec);
  EXPECT_NEAR(m.fitted_rate, 1.0, 1e-9);
  EXPECT_NEAR(m.fit_r2, 1.0, 1e-12);
  EXPECT_NEAR(m.running_l2.back(), std::sqrt(0.5 * (1 - std::exp(-20.0))), 1e-5);
  EXPECT_EQ(m.zero_crossings, 0);
  EXPECT_DOUBLE_EQ(m.peak_overshoot, 0.0);
  EXPECT_NEAR(m.final_error, std::exp(-10.0), 1e-15);
}

TEST(Metrics, ZeroErrorGivesZeros) {
  SimRecord rec;
  rec.n_m = 1;
  for (int k = 0; k < 100; ++k) {
    rec.times.push_back(0.01 * k);
    rec.states.push_back(v1(0));
    rec.errors.push_back(v1(0));
    rec.error_norms.push_back(0);
  }
  const auto m = compute_metrics(rec);
  EXPECT_EQ(m.final_error, 0);
  EXPECT_EQ(m.zero_crossings, 0);
  EXPECT_EQ(m.running_l2.back(), 0);
  EXPECT_EQ(m.fitted_rate, 0);
  EXPECT_LT(m.fit_points, 3);
}

TEST(Metrics, ZeroCrossingsUseHysteresis) {
  EXPECT_EQ(count_zero_crossings({1, -1, 1, -1}, 0.5), 3);
  // Chatter inside the band is ignored.
  EXPECT_EQ(count_zero_crossings({1, 0.1, -0.1, 0.1, -0.1, 0.2}, 0.5), 0);
  EXPECT_EQ(count_zero_crossings({1, 0.1, -0.1, 0.1, -0.6, 0.2, 0.7}, 0.5), 2);
  EXPECT_EQ(count_zero_crossings({}, 0.5), 0);
}

TEST(Metrics, OvershootAndDampedOscillation) {
  SimRecord rec;
  rec.n_m = 1;
  for (int k = 0; k < 4001; ++k) {
    const double t = 20.0 * k / 4000.0;
    const double e = -std::exp(-0.5 * t) * std::cos(3 * t);
    rec.times.push_back(t);
    rec.states.push_back(v1(e));
    rec.errors.push_back(v1(e));
    rec.error_norms.push_back(std::abs(e));
  }
  const auto m = compute_metrics(rec);
  // Zeros of cos 3t in [0, 20] whose neighbouring peaks exceed 1e-3.
  int expected = 0;
  for (int n = 0; n < 30; ++n) {
    const double tz = (M_PI / 2 + n * M_PI) / 3;
    if (tz < 20 && std::exp(-0.5 * (tz + M_PI / 3)) > 1e-3) ++expected;
  }
  EXPECT_NEAR(m.zero_crossings, expected, 1);
  // First peak on the far side: tan 3t = −1/6.
  const double tp = (M_PI - std::atan(1.0 / 6.0)) / 3.0;
  EXPECT_NEAR(m.peak_overshoot, std::exp(-0.5 * tp) * std::abs(std::cos(3 * tp)), 1e-4);
}

TEST(Metrics, FitRespectsNoiseFloorAndWindow) {
  std::vector<double> t, y;
  for (int k = 0; k < 1000; ++k) {
    t.push_back(0.01 * k);
    y.push_back(std::max(std::exp(-2.0 * t.back()), 1e-6));
  }
  const auto trimmed = exponential_fit(t, y, 0.0, 10.0, 2e-6);
  EXPECT_NEAR(trimmed.rate, 2.0, 1e-9);
  const auto all = exponential_fit(t, y, 0.0, 10.0, 0.0);
  EXPECT_LT(all.rate, 2.0);
  EXPECT_LT(all.r2, trimmed.r2);
  const auto none = exponential_fit(t, y, 20.0, 30.0);
  EXPECT_LT(none.points, 3);
  EXPECT_EQ(none.rate, 0.0);
}

TEST(Metrics, EmptyRecordIsConfigurationError) {
  EXPECT_THROW(compute_metrics(SimRecord{}), ConfigurationError);
}

TEST(Metrics, DefaultNoiseFloorScalesWithTarget) {
  const auto target = constant_target(v3(2.0, 0, 0));
  EXPECT_DOUBLE_EQ(default_noise_floor(target, 1.0, 1e-8), 100 * 1e-8 * 2.0);
}
