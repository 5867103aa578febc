#include <cmath>

#include <gtest/gtest.h>

#include "emctl/commands.hpp"
#include "emctl/errors.hpp"
#include "emctl/scenario.hpp"

using namespace emctl;

namespace {

const char* kMinimal = R"({
  "name": "t",
  "plant": { "builtin": "mems-optical-switch" },
  "controller": { "law": "regulation-1", "rbar_e": 100 },
  "target": { "kind": "equilibrium", "q_d": [3e-5] },
  "integrator": { "horizon": 0.01 }
})";

int schema_line(const std::string& text) {
  try {
    parse_scenario(text, "s.json");
  } catch (const SchemaError& e) {
    return e.line();
  }
  return -1;
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return text.replace(at, from.size(), to);
}

}  // namespace

TEST(Scenario, BundledScenariosParseAndRoundTrip) {
  const auto names = bundled_scenarios();
  ASSERT_GE(names.size(), 3u);
  for (const auto& name : names) {
    const Scenario s = load_scenario(resolve_scenario(name));
    EXPECT_EQ(parse_scenario(emit_scenario(s)), s) << name;
    for (const auto& c : expand_cases(s)) EXPECT_NO_THROW(build_scenario(c.scenario)) << name;
  }
}

TEST(Scenario, InlinePlantRoundTripAndMatchesBuiltin) {
  const std::string text = R"({
    "name": "inline",
    "plant": { "definition": {
      "name": "lev", "n_m": 1, "n_e": 1,
      "mass": 0.0844, "stiffness": 0, "linear": [0.828],
      "elastance": { "form": "affine", "base": 0.0078073764092314420, "slopes": [-1.5614752818462884] },
      "R_m": 0, "R_e": 2.25, "G_e": 1,
      "q_lower": [null], "q_upper": [0.005], "state_scale": [1e-3, 1e-4, 1]
    } },
    "controller": { "law": "tracking-2", "Rbar_e": 2.82, "Gamma": 0.7807376409231442, "k_c": 20 },
    "target": { "kind": "sinusoid", "offset": 2.5e-3, "amplitude": 1e-3, "omega": 2 },
    "integrator": { "horizon": 1 }
  })";
  const Scenario s = parse_scenario(text);
  EXPECT_EQ(parse_scenario(emit_scenario(s)), s);
  const BuiltScenario b = build_scenario(s);
  const EMPlant ref = make_maglev_plant();
  Vector eta(3);
  eta << 1e-3, 2e-4, 0.9;
  EXPECT_NEAR(hamiltonian(b.plant, eta), hamiltonian(ref, eta), 1e-14);
  EXPECT_LT((grad_hamiltonian(b.plant, eta) - grad_hamiltonian(ref, eta)).norm(), 1e-13);
  EXPECT_TRUE(std::isinf(b.plant.q_lower(0)));
}

TEST(Scenario, MalformedJsonReportsLine) {
  const std::string bad = replace(kMinimal, "\"t\",", "\"t\"");
  EXPECT_EQ(schema_line(bad), 3);
  EXPECT_EQ(schema_line("{\n\n  \"name\": tru\n}"), 3);
}

TEST(Scenario, SchemaViolationsReportLine) {
  EXPECT_EQ(schema_line(replace(kMinimal, "\"rbar_e\": 100", "\"rbar_e\": 100, \"gain\": 1")), 4);
  EXPECT_EQ(schema_line(replace(kMinimal, "\"horizon\": 0.01", "\"horizon\": \"long\"")), 6);
  EXPECT_EQ(schema_line(replace(kMinimal, "\"horizon\": 0.01", "\"horizon\": -1")), 6);
  EXPECT_EQ(schema_line(replace(kMinimal, "mems-optical-switch", "mems")), 3);
  EXPECT_EQ(schema_line(replace(kMinimal, "regulation-1", "pid")), 4);
  EXPECT_EQ(schema_line(replace(kMinimal, "\"rbar_e\": 100", "\"rbar_e\": 100, \"K_e\": 0")), 4);
  EXPECT_EQ(schema_line(replace(kMinimal, "\"q_d\": [3e-5]", "\"q_d\": 3e-5")), 5);
  EXPECT_EQ(schema_line(replace(kMinimal, "\"name\": \"t\",\n", "")), 1);
  try {
    parse_scenario(replace(kMinimal, "\"rbar_e\": 100", "\"rbar_e\": 100, \"gain\": 1"), "s.json");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("s.json:4"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("gain"), std::string::npos) << e.what();
  }
}

TEST(Scenario, PlantParametersAreChecked) {
  const std::string ok = replace(kMinimal, "{ \"builtin\": \"mems-optical-switch\" }",
                                 "{ \"builtin\": \"mems-optical-switch\", \"parameters\": { \"r_e\": 50 } }");
  EXPECT_DOUBLE_EQ(build_scenario(parse_scenario(ok)).plant.R_e(0, 0), 1.0 / 50);
  EXPECT_EQ(schema_line(replace(ok, "r_e", "R_e")), 3);
}

TEST(Scenario, CaseOverridesRestrictedToSchemaKeys) {
  const std::string base = replace(kMinimal, "\"integrator\"",
                                   "\"cases\": [\n  { \"label\": \"a\", \"set\": { \"controller.D_d\": -1 } },\n"
                                   "  { \"label\": \"b\", \"set\": { \"controller.damping\": 1 } }\n],\n"
                                   "\"integrator\"");
  const int line = schema_line(base);
  EXPECT_EQ(line, 8);
  const Scenario s = parse_scenario(replace(base, "controller.damping", "controller.Gamma"));
  const auto cases = expand_cases(s);
  ASSERT_EQ(cases.size(), 2u);
  EXPECT_EQ(cases[0].label, "a");
  EXPECT_EQ(cases[0].scenario.controller.D_d, MatrixValue::of(-1));
  EXPECT_EQ(cases[1].scenario.controller.Gamma, MatrixValue::of(1));
  EXPECT_TRUE(cases[0].scenario.cases.empty());
  EXPECT_EQ(schema_line(replace(base, "\"b\"", "\"a\"")), 8);
  EXPECT_EQ(schema_line(replace(base, "\"b\"", "\"b/c\"")), 8);
}

TEST(Scenario, MaglevCasesBuildPrintedGains) {
  const Scenario s = load_scenario(resolve_scenario("maglev_tracking"));
  const auto cases = expand_cases(s);
  ASSERT_EQ(cases.size(), 4u);
  const double g = 1 / (2 * 0.64042);
  const double expect_rbar[] = {0.82, 0.82, 2.82, 2.82};
  const double expect_d[] = {0, -1, 0, -1};
  for (int i = 0; i < 4; ++i) {
    const BuiltScenario b = build_scenario(cases[i].scenario);
    EXPECT_NEAR(b.K_e(0, 0), expect_rbar[i] - 2.25, 1e-15) << i;
    EXPECT_NEAR(b.D_d(0, 0), expect_d[i] * g, 1e-15) << i;
    EXPECT_NEAR(b.Gamma(0, 0), g, 1e-15);
    EXPECT_EQ(b.law, LawKind::tracking2);
    EXPECT_DOUBLE_EQ(b.shaping.gain(0, 0), 20.0);
    const Vector star = b.target.state(0.0);
    EXPECT_DOUBLE_EQ(b.eta0(0), star(0) - 1e-3);
    EXPECT_DOUBLE_EQ(b.eta0(2), star(2));
    EXPECT_EQ(b.integrator.method, IntegrationMethod::explicit_rk);
  }
}

TEST(Scenario, MemsBuildUsesResistanceForm) {
  const Scenario s = load_scenario(resolve_scenario("mems_regulation"));
  const BuiltScenario b = build_scenario(s);
  EXPECT_NEAR(b.K_e(0, 0), 0.0, 1e-18);
  EXPECT_EQ(b.integrator.method, IntegrationMethod::implicit_rk);
  EXPECT_DOUBLE_EQ(b.integrator.horizon, 0.05);
  EXPECT_EQ(b.integrator.output_samples, 2000);
  EXPECT_DOUBLE_EQ(b.eta0(0), 1.5e-5);
  ASSERT_TRUE(s.sweep.has_value());
  EXPECT_EQ(s.sweep->grid.size(), 11u);
}

TEST(Scenario, RegionAndInitialSizesAreChecked) {
  std::string text = replace(kMinimal, "\"integrator\"",
                             "\"region\": { \"lower\": [1e-5, -1e-10, 0], \"upper\": [5e-5, 1e-10, 1e-10],"
                             " \"points_per_dim\": 3 },\n\"integrator\"");
  const BuiltScenario b = build_scenario(parse_scenario(text));
  ASSERT_TRUE(b.verification.region.has_value());
  EXPECT_EQ(b.verification.region->points_per_dim, 3);
  EXPECT_EQ(b.verification.region->times, std::vector<double>{0.0});
  text = replace(text, "\"lower\": [1e-5, -1e-10, 0]", "\"lower\": [1e-5, -1e-10]");
  EXPECT_GT(schema_line(text), 0);
  const std::string bad_ic = replace(kMinimal, "\"integrator\"", "\"initial\": { \"state\": [1, 2] },\n\"integrator\"");
  EXPECT_THROW(build_scenario(parse_scenario(bad_ic)), ConfigurationError);
}

TEST(Scenario, OverridesAndSweepKeys) {
  const Scenario s = parse_scenario(kMinimal);
  const Scenario o = with_override(s, "controller.D_d", -0.5);
  EXPECT_EQ(o.controller.D_d, MatrixValue::of(-0.5));
  EXPECT_THROW(with_override(s, "controller.nothing", 1), SchemaError);
  EXPECT_EQ(sweep_key_path("D_d"), "controller.D_d");
  EXPECT_THROW(sweep_key_path("speed"), ConfigurationError);
}

TEST(Scenario, MatrixValues) {
  EXPECT_EQ(MatrixValue::of(2).to_matrix(2, 2, "m"), 2 * Matrix::Identity(2, 2));
  EXPECT_EQ(MatrixValue::of(0).to_matrix(1, 2, "m"), Matrix::Zero(1, 2));
  EXPECT_THROW(MatrixValue::of(1).to_matrix(1, 2, "m"), ConfigurationError);
  MatrixValue m{{{1, 2}, {3, 4}}, false};
  Matrix expect(2, 2);
  expect << 1, 2, 3, 4;
  EXPECT_EQ(m.to_matrix(2, 2, "m"), expect);
  EXPECT_THROW(m.to_matrix(1, 2, "m"), ConfigurationError);
}
