#pragma once

#include <map>
#include <string>
#include <vector>

#include "emctl/ph_model.hpp"

namespace emctl {

/// V(q) = ½qᵀKq + bᵀq + ¼Σ a4_i q_i⁴ with constant mass and an elastance that
/// is either affine, Ψ = Ψ₀ + Σ q_k Ψ_k, or the inverse of an affine
/// capacitance, Ψ = C(q)⁻¹ with C = C₀ + Σ q_k C_k.
struct PolynomialPlantSpec {
  std::string name = "custom";
  int n_m = 1;
  int n_e = 1;
  Matrix mass;
  Matrix stiffness;
  Vector linear;
  Vector quartic;
  enum class ElastanceForm { affine, inverse_affine };
  ElastanceForm form = ElastanceForm::affine;
  Matrix base;                  // Ψ₀ or C₀
  std::vector<Matrix> slopes;   // Ψ_k or C_k, one per q_k
  Matrix R_m, J_e, R_e, G_e;
  Vector q_lower, q_upper;
  Vector state_scale;
};

EMPlant make_polynomial_plant(const PolynomialPlantSpec& spec);

struct MemsParameters {
  double c0 = 15e-6;
  double c1 = 35.6e-9;
  double m = 2.35e-9;
  double a1 = 0.46;
  double a2 = 0.0973;
  double R_m = 5.5e-7;
  double r_e = 100.0;
};

struct MaglevParameters {
  double k = 0.64042;
  double R_e = 2.25;
  double c = 0.005;
  double b = 0.828;
  double m = 0.0844;
  double R_m = 0.0;
};

EMPlant make_mems_plant(const MemsParameters& params = {});
EMPlant make_maglev_plant(const MaglevParameters& params = {});

/// MEMS x_ed = (c₀+q_d)√(2c₁q_d(a₁+a₂q_d²)).
double mems_equilibrium_charge(const MemsParameters& params, double q_d);

std::vector<std::string> builtin_plant_names();
/// Builds "mems-optical-switch" or "maglev" with named parameter overrides.
EMPlant make_builtin_plant(const std::string& name,
                           const std::map<std::string, double>& overrides = {});
std::vector<std::string> builtin_plant_parameters(const std::string& name);

}  // namespace emctl
