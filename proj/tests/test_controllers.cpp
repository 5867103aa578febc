#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "emctl/builtin_plants.hpp"
#include "emctl/controllers.hpp"
#include "emctl/errors.hpp"
#include "emctl/reference.hpp"

using namespace emctl;

namespace {

constexpr double c0 = 15e-6, c1 = 35.6e-9, mm = 2.35e-9, re = 100.0;
constexpr double qd = 3e-5;
constexpr double k = 0.64042, Re = 2.25, cc = 0.005, b = 0.828, m = 0.0844;

Matrix s1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }
Vector v3(double a, double bb, double c) {
  Vector v(3);
  v << a, bb, c;
  return v;
}

double mems_xd() { return (c0 + qd) * std::sqrt(2 * c1 * qd * (0.46 + 0.0973 * qd * qd)); }

ClosedLoopShape mems_shape(double rbar, double dd) {
  const auto plant = make_mems_plant();
  return make_shape(plant, s1(0), s1(dd), s1(1.0 / rbar - 1.0 / re));
}

ClosedLoopShape maglev_shape(double rbar, double dd_basis) {
  const auto plant = make_maglev_plant();
  const double gamma = 1.0 / (2 * k);
  return make_shape(plant, s1(gamma), s1(dd_basis * gamma), s1(rbar - Re));
}

MotionProfile mems_sinusoid() {
  MotionProfile p;
  p.kind = MotionProfile::Kind::sinusoid;
  p.offset = 0.05;
  p.amplitude = 0.05;
  p.omega = 30;
  return p;
}

MotionProfile maglev_sinusoid() {
  MotionProfile p;
  p.kind = MotionProfile::Kind::sinusoid;
  p.offset = 2.5e-3;
  p.amplitude = 1e-3;
  p.omega = 2;
  return p;
}

// Per-component scale of the two sides of a field comparison.
Vector comparison_scale(const ControllerLaw& law, const Vector& eta, double t) {
  const Vector u = law.raw_input(eta, t);
  return field_term_scale(law.plant(), eta, u) +
         law.closed_loop_structure().cwiseAbs() * law.desired_gradient(eta, t).cwiseAbs();
}

double scaled_mismatch(const Vector& a, const Vector& bb, const Vector& scale) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a(i) - bb(i)) / std::max(scale(i), 1e-300));
  }
  return worst;
}

Vector random_mems_state(std::mt19937_64& rng, double qc, double xc) {
  std::uniform_real_distribution<double> u(-1, 1);
  return v3(qc * (1 + 0.5 * u(rng)), 1e-9 * u(rng), xc * (1 + 0.5 * u(rng)));
}

Vector random_maglev_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  return v3(2.5e-3 + 2e-3 * u(rng), 1e-3 * u(rng), 1.03 * (1 + 0.5 * u(rng)));
}

}  // namespace

TEST(ZMap, ScalarElectricalOnly) {
  const auto plant = make_mems_plant();
  const auto shape = mems_shape(50, 0);  // Rbar = 0.02
  EXPECT_NEAR(z_map(shape, plant, v1(1e-5), v1(3.0))(0), (1.0 / re) * 3.0 / 0.02, 1e-12);
}

TEST(ZMap, MaglevFormula) {
  const auto plant = make_maglev_plant();
  const auto shape = maglev_shape(0.82, 0);
  const double q = 1e-3, x = 1.1;
  EXPECT_NEAR(z_map(shape, plant, v1(q), v1(x))(0), (q / (2 * k) + x) / 0.82, 1e-14);
}

TEST(ZMap, ChainRuleIdentities) {
  const auto plant = make_maglev_plant();
  const auto shape = maglev_shape(2.82, -1);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 50; ++i) {
    const Vector gz = v1(nd(rng));
    const Vector gx = z_gradient_to_x(plant, shape, gz);
    EXPECT_NEAR(x_gradient_to_z(plant, shape, gx)(0), gz(0), 1e-14 * (1 + std::abs(gz(0))));
    // Directional check: d/dx_e of a linear function aᵀz equals Z_xᵀa.
    const Vector q = v1(1e-3), x = v1(1.0 + 0.1 * nd(rng));
    const double h = 1e-6;
    const double dz_dx = (z_map(shape, plant, q, x + v1(h))(0) - z_map(shape, plant, q, x - v1(h))(0)) / (2 * h);
    const double dz_dq = (z_map(shape, plant, q + v1(h), x)(0) - z_map(shape, plant, q - v1(h), x)(0)) / (2 * h);
    EXPECT_NEAR(gx(0), dz_dx * gz(0), 1e-8 * std::abs(gx(0)) + 1e-14);
    EXPECT_NEAR((shape.Gamma * gx)(0), dz_dq * gz(0), 1e-8 * std::abs(gx(0)) + 1e-14);
  }
}

TEST(Shape, SingularRbarIsConfigurationError) {
  const auto plant = make_mems_plant();
  EXPECT_THROW(make_shape(plant, s1(0), s1(0), s1(-1.0 / re)), ConfigurationError);
  EXPECT_THROW(z_map(ClosedLoopShape{s1(0), s1(0), s1(0), s1(0)}, plant, v1(0), v1(0)),
               Error);
}

TEST(Shape, TargetStructureBlocks) {
  const auto plant = make_maglev_plant();
  const auto shape = maglev_shape(0.82, -1);
  const Matrix f = target_structure(plant, shape);
  const double g = 1 / (2 * k);
  EXPECT_EQ(f(0, 1), 1.0);
  EXPECT_EQ(f(1, 0), -1.0);
  EXPECT_EQ(f(1, 2), g);
  EXPECT_NEAR(f(2, 1), -g - g, 1e-15);
  EXPECT_NEAR(f(2, 2), -0.82, 1e-15);
  const Matrix jd = target_interconnection(plant, shape), rd = target_dissipation(plant, shape);
  EXPECT_LT((jd + jd.transpose()).norm(), 1e-15);
  EXPECT_LT((jd - rd - f).norm(), 1e-15);
}

TEST(RegulationLaw1, MemsEquilibriumIsStationary) {
  const auto plant = make_mems_plant();
  const auto target = make_equilibrium_target(plant, v1(qd));
  const auto law = make_controller(LawKind::regulation1, plant, mems_shape(100, 0), target, {});
  const double l1 = -mems_xd() / (c1 * (qd + c0));
  EXPECT_NEAR(l1, -27.84, 0.005);
  EXPECT_NEAR(law.primary().center(0)(0), mems_xd() - l1, 1e-12);
  const Vector eta = target.state(0);
  const Vector f = law.closed_loop_field(eta, 0);
  const Vector scale = comparison_scale(law, eta, 0);
  EXPECT_LT(scaled_mismatch(f, Vector::Zero(3), scale), 1e-12);
  EXPECT_NEAR(law.desired_energy(eta, 0), 0.0, 1e-12 * hamiltonian(plant, eta) + 1e-25);
}

TEST(RegulationLaw1, IndependentOfMomentumWithoutCoupledDamping) {
  const auto plant = make_mems_plant();
  const auto target = make_equilibrium_target(plant, v1(qd));
  const auto law = make_controller(LawKind::regulation1, plant, mems_shape(100, 0), target, {});
  EXPECT_EQ(law.raw_input(v3(2e-5, 0, 1e-11), 0)(0), law.raw_input(v3(2e-5, 3e-9, 1e-11), 0)(0));
}

TEST(RegulationLaw1, HandEvaluatedAtInitialState) {
  const auto plant = make_mems_plant();
  const auto target = make_equilibrium_target(plant, v1(qd));
  const double rbar = 80.0, dd = -1.0;
  const auto shape = mems_shape(rbar, dd);
  const auto law = make_controller(LawKind::regulation1, plant, shape, target, {});
  const double xd = mems_xd(), l1 = -xd / (c1 * (qd + c0)), ke = 1 / rbar - 1 / re;
  for (const Vector& eta : {v3(1.5e-5, 0, 0), v3(1.5e-5, 2e-9, 3e-11)}) {
    const double q = eta(0), p = eta(1), x = eta(2);
    const double expected = -(re / rbar) * (x - xd + l1) - ke * re * x / (c1 * (q + c0)) +
                            re * dd * p / mm;
    const double u = regulation_law_1(plant, shape, law.primary(), eta)(0);
    EXPECT_TRUE(std::isfinite(u));
    EXPECT_NEAR(u, expected, 1e-12 * std::abs(expected));
  }
}

TEST(RegulationLaw2, MaglevAssumptionAndStationarity) {
  const auto plant = make_maglev_plant();
  const auto target = make_equilibrium_target(plant, v1(2.5e-3));
  EXPECT_NEAR(target.state(0)(2), std::sqrt(2 * k * b), 1e-12);
  EXPECT_NEAR(target.state(0)(2), 1.0298, 1e-4);
  const auto shape = maglev_shape(2.82, 0);
  ShapingChoice choice;
  choice.gain = s1(20.0);
  const auto law = make_controller(LawKind::regulation2, plant, shape, target, choice);
  std::vector<Vector> states;
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) states.push_back(random_maglev_state(rng));
  EXPECT_LT(coupling_linearity_residual(plant, shape, *law.auxiliary(), states), 1e-12);
  const Vector eta = target.state(0);
  EXPECT_LT(scaled_mismatch(law.closed_loop_field(eta, 0), Vector::Zero(3),
                            comparison_scale(law, eta, 0)),
            1e-12);
  EXPECT_LT(law.desired_gradient(eta, 0).norm(), 1e-12);
}

TEST(RegulationLaw2, MomentumTermVanishesWhenDdEqualsGammaT) {
  const auto plant = make_maglev_plant();
  const auto target = make_equilibrium_target(plant, v1(2.5e-3));
  const auto shape = maglev_shape(2.82, 1.0);  // D_d = Γᵀ
  const auto law = make_controller(LawKind::regulation2, plant, shape, target, {});
  const Vector a = v3(2e-3, 0.0, 1.0), bb = v3(2e-3, 0.05, 1.0);
  EXPECT_EQ(law.raw_input(a, 0)(0), law.raw_input(bb, 0)(0));
}

TEST(RegulationLaw2, MemsIsModelMismatch) {
  const auto plant = make_mems_plant();
  const auto target = make_equilibrium_target(plant, v1(qd));
  const auto shape = make_shape(plant, s1(1.0), s1(0), s1(0));
  EXPECT_THROW(make_controller(LawKind::regulation2, plant, shape, target, {}),
               ModelMismatchError);
}

TEST(RegulationLaws, RequireEquilibriumTarget) {
  const auto plant = make_mems_plant();
  const auto target = make_reference(plant, mems_sinusoid(), 0.2);
  EXPECT_THROW(make_controller(LawKind::regulation1, plant, mems_shape(100, 0), target, {}),
               ConfigurationError);
}

TEST(TrackingLaw1, ReproducesMemsTrackingLaw) {
  const auto plant = make_mems_plant();
  const auto target = make_reference(plant, mems_sinusoid(), 0.3);
  const double rbar = 60.0, dd = -0.4, ke = 1 / rbar - 1 / re;
  const auto shape = mems_shape(rbar, dd);
  const auto law = make_controller(LawKind::tracking1, plant, shape, target, {});
  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    const double t = 0.2 * i / 50.0;
    const Vector ref = target.state(t), rate = target.rate(t);
    const Vector eta = random_mems_state(rng, ref(0), ref(2));
    const double qs = ref(0), ps = ref(1), xs = ref(2), dxs = rate(2);
    const double l2 = -rbar * dxs - xs / (c1 * (qs + c0)) + rbar * (dd / mm) * ps;
    const double q = eta(0), p = eta(1), x = eta(2);
    const double expected = -(re / rbar) * (x - xs + l2) - ke * re * x / (c1 * (q + c0)) +
                            re * (dd / mm) * p;
    const double u = tracking_law_1(plant, shape, law.primary(), eta, t)(0);
    EXPECT_NEAR(u, expected, 1e-10 * (std::abs(expected) + re * std::abs(l2) / rbar));
  }
}

TEST(TrackingLaw1, RegulationSpecialCaseMatchesRegulationLaw) {
  const auto plant = make_mems_plant();
  const auto target = make_equilibrium_target(plant, v1(qd));
  const auto shape = mems_shape(100, -1);
  const auto a = make_controller(LawKind::tracking1, plant, shape, target, {});
  const auto r = make_controller(LawKind::regulation1, plant, shape, target, {});
  std::mt19937_64 rng(13);
  for (int i = 0; i < 20; ++i) {
    const Vector eta = random_mems_state(rng, qd, mems_xd());
    EXPECT_NEAR(a.raw_input(eta, 0.01 * i)(0), r.raw_input(eta, 0)(0),
                1e-13 * std::abs(r.raw_input(eta, 0)(0)));
  }
}

TEST(TrackingLaw1, TargetIsClosedLoopTrajectory) {
  const auto plant = make_mems_plant();
  const auto target = make_reference(plant, mems_sinusoid(), 0.3);
  const auto law = make_controller(LawKind::tracking1, plant, mems_shape(100, -0.4), target, {});
  for (int i = 0; i <= 30; ++i) {
    const double t = 0.01 * i;
    const Vector eta = target.state(t);
    const Vector scale = comparison_scale(law, eta, t) + target.rate(t).cwiseAbs();
    EXPECT_LT(scaled_mismatch(law.closed_loop_field(eta, t), target.rate(t), scale), 1e-10);
  }
}

TEST(TrackingLaw2, ReproducesMaglevLawWithFeasibleOffset) {
  const auto plant = make_maglev_plant();
  const auto target = make_reference(plant, maglev_sinusoid(), 10.0);
  const double kc = 20.0;
  for (double rbar : {0.82, 2.82}) {
    for (double dd : {0.0, -1.0}) {
      const auto shape = maglev_shape(rbar, dd);
      ShapingChoice choice;
      choice.gain = s1(kc);
      const auto law = make_controller(LawKind::tracking2, plant, shape, target, choice);
      std::mt19937_64 rng(21);
      for (int i = 0; i < 40; ++i) {
        const double t = 0.25 * i;
        const Vector ref = target.state(t), rate = target.rate(t);
        const Vector eta = random_maglev_state(rng);
        const double zs = (ref(0) / (2 * k) + ref(2)) / rbar;
        const double l3 = (rate(2) + rbar * ref(2) * ref(2) + kc * zs +
                           ((1 - dd) / (2 * k * m)) * ref(1)) / kc;
        const double q = eta(0), p = eta(1), x = eta(2);
        const double z = (q / (2 * k) + x) / rbar;
        const double expected = ((-1 + dd) / (2 * k * m)) * p - rbar * x * x - kc * (z - l3) +
                                (Re / k) * (cc - q) * x;
        const double u = law.raw_input(eta, t)(0);
        EXPECT_NEAR(u, expected, 1e-11 * (1 + std::abs(expected))) << rbar << " " << dd;
        const Vector scale = comparison_scale(law, ref, t) + rate.cwiseAbs();
        EXPECT_LT(scaled_mismatch(law.closed_loop_field(ref, t), rate, scale), 1e-10);
      }
    }
  }
}

TEST(TrackingLaw2, OffsetAgreesWithPrintedFormWithoutCoupledDamping) {
  // For D_d = 0 the feasibility-derived offset reduces to (1/(2km))p⋆.
  const auto plant = make_maglev_plant();
  const auto target = make_reference(plant, maglev_sinusoid(), 5.0);
  ShapingChoice choice;
  choice.gain = s1(20.0);
  const auto law = make_controller(LawKind::tracking2, plant, maglev_shape(0.82, 0), target, choice);
  for (double t : {0.0, 0.7, 1.9}) {
    const Vector ref = target.state(t), rate = target.rate(t);
    const double zs = (ref(0) / (2 * k) + ref(2)) / 0.82;
    const double l3 = (rate(2) + 0.82 * ref(2) * ref(2) + 20 * zs + ref(1) / (2 * k * m)) / 20;
    EXPECT_NEAR(law.primary().center(t)(0), l3, 1e-12 * std::abs(l3));
  }
}

TEST(TrackingLaw2, ConstantLevelFeedforward) {
  const auto plant = make_maglev_plant();
  MotionProfile p;
  p.offset = 1e-3;
  const auto target = make_reference(plant, p, 1.0);
  EXPECT_NEAR(target.state(0.5)(2), std::sqrt(2 * k * b), 1e-12);
}

TEST(Invariants, MatchingIdentityOnRandomStates) {
  const auto plant = make_maglev_plant();
  const auto target = make_reference(plant, maglev_sinusoid(), 10.0);
  ShapingChoice choice;
  choice.gain = s1(20.0);
  const auto law = make_controller(LawKind::tracking2, plant, maglev_shape(0.82, -1), target, choice);
  const Matrix gamma = law.shape().Gamma;
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const Vector eta = random_maglev_state(rng);
    const double t = 0.1 * i;
    const Vector gd = law.desired_gradient(eta, t);
    const Vector g = grad_hamiltonian(plant, eta);
    const Vector lhs = -gd.head(1) + gamma * gd.tail(1) + g.head(1);
    const double scale = std::abs(gd(0)) + std::abs((gamma * gd.tail(1))(0)) + std::abs(g(0));
    EXPECT_LT(std::abs(lhs(0)), 1e-9 * scale);
  }
}

TEST(Invariants, LawFieldConsistencyAllLaws) {
  std::mt19937_64 rng(41);
  const auto mems = make_mems_plant();
  const auto maglev = make_maglev_plant();
  ShapingChoice kc;
  kc.gain = s1(20.0);
  std::vector<std::pair<ControllerLaw, int>> laws;
  laws.emplace_back(make_controller(LawKind::regulation1, mems, mems_shape(100, -1),
                                    make_equilibrium_target(mems, v1(qd)), {}), 0);
  laws.emplace_back(make_controller(LawKind::tracking1, mems, mems_shape(100, -0.4),
                                    make_reference(mems, mems_sinusoid(), 1.0), {}), 1);
  laws.emplace_back(make_controller(LawKind::regulation2, maglev, maglev_shape(2.82, -1),
                                    make_equilibrium_target(maglev, v1(2.5e-3)), kc), 2);
  laws.emplace_back(make_controller(LawKind::tracking2, maglev, maglev_shape(0.82, -1),
                                    make_reference(maglev, maglev_sinusoid(), 10.0), kc), 2);
  for (const auto& [law, family] : laws) {
    for (int i = 0; i < 100; ++i) {
      const double t = 0.005 * i;
      Vector eta;
      if (family == 0) eta = random_mems_state(rng, qd, mems_xd());
      else if (family == 1) eta = random_mems_state(rng, law.target().state(t)(0), law.target().state(t)(2));
      else eta = random_maglev_state(rng);
      const Vector scale = comparison_scale(law, eta, t);
      EXPECT_LT(scaled_mismatch(law.closed_loop_field(eta, t), law.target_field(eta, t), scale),
                1e-9)
          << to_string(law.kind());
    }
  }
}

TEST(Invariants, DesiredHessianMatchesDifferences) {
  const auto plant = make_maglev_plant();
  ShapingChoice kc;
  kc.gain = s1(20.0);
  const auto law = make_controller(LawKind::tracking2, plant, maglev_shape(0.82, -1),
                                   make_reference(plant, maglev_sinusoid(), 10.0), kc);
  std::mt19937_64 rng(43);
  for (int i = 0; i < 20; ++i) {
    const Vector eta = random_maglev_state(rng);
    const double t = 0.3 * i;
    const Matrix h = law.desired_hessian(eta, t);
    for (int j = 0; j < 3; ++j) {
      const double step = 1e-6 * std::max(std::abs(eta(j)), plant.state_scale(j));
      Vector ep = eta, em = eta;
      ep(j) += step;
      em(j) -= step;
      const Vector col = (law.desired_gradient(ep, t) - law.desired_gradient(em, t)) / (2 * step);
      const double grad_round = 1e-15 * law.desired_gradient(eta, t).cwiseAbs().sum() / step;
      EXPECT_LT((Vector(h.col(j)) - col).norm(), 1e-6 * col.norm() + grad_round);
      const double e = (law.desired_energy(ep, t) - law.desired_energy(em, t)) / (2 * step);
      const double energy_round = 1e-15 * std::abs(law.desired_energy(eta, t)) / step;
      EXPECT_NEAR(e, law.desired_gradient(eta, t)(j), 1e-6 * std::abs(e) + energy_round);
    }
  }
}

TEST(Invariants, EnergyBalanceOfRegulationLaws) {
  const auto plant = make_mems_plant();
  const auto target = make_equilibrium_target(plant, v1(qd));
  const double bound = std::sqrt(4 * 0.01 * 5.5e-7);
  const auto shape = mems_shape(100, -0.9 * bound);
  const auto law = make_controller(LawKind::regulation1, plant, shape, target, {});
  const Matrix bt = energy_balance_matrix(plant, shape);
  std::mt19937_64 rng(51);
  for (int i = 0; i < 100; ++i) {
    const Vector eta = random_mems_state(rng, qd, mems_xd());
    const Vector gd = law.desired_gradient(eta, 0);
    const double hdot = gd.dot(law.closed_loop_field(eta, 0));
    Vector zz(2);
    zz << gd(1), gd(2);
    const double rhs = -zz.dot(bt * zz);
    EXPECT_LE(rhs, 0.0);
    const double scale = std::abs(gd(1) * law.closed_loop_field(eta, 0)(1)) +
                         std::abs(gd(0) * law.closed_loop_field(eta, 0)(0)) +
                         std::abs(gd(2) * law.closed_loop_field(eta, 0)(2)) + std::abs(rhs);
    EXPECT_NEAR(hdot, rhs, 1e-8 * scale);
  }
}

TEST(Certification, InputIsGatedByReport) {
  const auto plant = make_mems_plant();
  auto law = make_controller(LawKind::regulation1, plant, mems_shape(100, 0),
                             make_equilibrium_target(plant, v1(qd)), {});
  EXPECT_THROW(law.input(v3(qd, 0, 0), 0), RefusalError);
  ConditionReport failing;
  failing.conditions.push_back({"ph_structure_strict", "", ConditionStatus::fail, -1.0, ""});
  law.attach_report(failing, false);
  try {
    law.input(v3(qd, 0, 0), 0);
    FAIL();
  } catch (const RefusalError& e) {
    ASSERT_EQ(e.failed_conditions().size(), 1u);
    EXPECT_EQ(e.failed_conditions()[0], "ph_structure_strict");
  }
  law.attach_report(failing, true);
  EXPECT_NO_THROW(law.input(v3(qd, 0, 0), 0));
  ConditionReport passing;
  passing.conditions.push_back({"x", "", ConditionStatus::pass, 1.0, ""});
  passing.conditions.push_back({"y", "", ConditionStatus::assumed, 0.0, ""});
  law.attach_report(passing, false);
  EXPECT_TRUE(law.cleared());
}
