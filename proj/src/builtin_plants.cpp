#include "emctl/builtin_plants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "emctl/errors.hpp"

namespace emctl {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Vector vec1(double v) { return Vector::Constant(1, v); }


Matrix capacitance(const PolynomialPlantSpec& s, const Vector& q) {
  Matrix c = s.base;
  for (int k = 0; k < s.n_m; ++k) c += q(k) * s.slopes[k];
  return c;
}

Matrix inverse_spd(const Matrix& c) {
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success) {
    throw DomainError("capacitance matrix is not positive definite");
  }
  return llt.solve(Matrix::Identity(c.rows(), c.cols()));
}

}  // namespace

EMPlant make_polynomial_plant(const PolynomialPlantSpec& spec) {
  const int nm = spec.n_m, ne = spec.n_e;
  auto s = std::make_shared<const PolynomialPlantSpec>(spec);
  if (static_cast<int>(spec.slopes.size()) != nm) {
    throw ConfigurationError("elastance needs one slope matrix per q component");
  }
  if (spec.mass.rows() != nm || spec.mass.cols() != nm ||
      !linalg::is_positive_definite(spec.mass)) {
    throw ConfigurationError("mass must be an n_m x n_m positive definite matrix");
  }

  EMPlant p;
  p.name = spec.name;
  p.n_m = nm;
  p.n_e = ne;
  p.mass = [s](const Vector&) { return s->mass; };
  p.potential = [s](const Vector& q) {
    double v = 0.5 * q.dot(s->stiffness * q);
    if (s->linear.size()) v += s->linear.dot(q);
    if (s->quartic.size()) v += 0.25 * s->quartic.dot(q.array().pow(4).matrix());
    return v;
  };
  p.potential_gradient = [s](const Vector& q) {
    Vector g = s->stiffness * q;
    if (s->linear.size()) g += s->linear;
    if (s->quartic.size()) g += (s->quartic.array() * q.array().cube()).matrix();
    return g;
  };
  p.potential_hessian = [s](const Vector& q) {
    Matrix h = s->stiffness;
    if (s->quartic.size()) {
      h.diagonal() += (3.0 * s->quartic.array() * q.array().square()).matrix();
    }
    return h;
  };
  if (spec.form == PolynomialPlantSpec::ElastanceForm::affine) {
    p.elastance = [s](const Vector& q) { return capacitance(*s, q); };
    p.elastance_derivative = [s](const Vector&, int k) { return s->slopes[k]; };
    p.elastance_second_derivative = [s](const Vector&, int, int) {
      return Matrix(Matrix::Zero(s->n_e, s->n_e));
    };
  } else {
    p.elastance = [s](const Vector& q) { return inverse_spd(capacitance(*s, q)); };
    p.elastance_derivative = [s](const Vector& q, int k) {
      const Matrix psi = inverse_spd(capacitance(*s, q));
      return Matrix(-psi * s->slopes[k] * psi);
    };
    p.elastance_second_derivative = [s](const Vector& q, int k, int l) {
      const Matrix psi = inverse_spd(capacitance(*s, q));
      return Matrix(psi * s->slopes[k] * psi * s->slopes[l] * psi +
                    psi * s->slopes[l] * psi * s->slopes[k] * psi);
    };
  }
  p.R_m = spec.R_m;
  p.J_e = spec.J_e;
  p.R_e = spec.R_e;
  p.G_e = spec.G_e;
  p.q_lower = spec.q_lower.size()
                  ? spec.q_lower
                  : Vector::Constant(nm, -std::numeric_limits<double>::infinity());
  p.q_upper = spec.q_upper.size()
                  ? spec.q_upper
                  : Vector::Constant(nm, std::numeric_limits<double>::infinity());
  p.state_scale = spec.state_scale.size() ? spec.state_scale
                                          : Vector::Ones(2 * nm + ne);
  p.validate();
  return p;
}

EMPlant make_mems_plant(const MemsParameters& mp) {
  PolynomialPlantSpec s;
  s.name = "mems-optical-switch";
  s.mass = scalar(mp.m);
  s.stiffness = scalar(mp.a1);
  s.linear = vec1(0.0);
  s.quartic = vec1(mp.a2);
  s.form = PolynomialPlantSpec::ElastanceForm::inverse_affine;
  s.base = scalar(mp.c1 * mp.c0);
  s.slopes = {scalar(mp.c1)};
  s.R_m = scalar(mp.R_m);
  s.J_e = scalar(0.0);
  s.R_e = scalar(1.0 / mp.r_e);
  s.G_e = scalar(1.0 / mp.r_e);
  s.q_lower = vec1(-mp.c0);
  s.state_scale = Vector(3);
  s.state_scale << 1e-5, 1e-10, 1e-11;
  return make_polynomial_plant(s);
}

EMPlant make_maglev_plant(const MaglevParameters& mp) {
  PolynomialPlantSpec s;
  s.name = "maglev";
  s.mass = scalar(mp.m);
  s.stiffness = scalar(0.0);
  s.linear = vec1(mp.b);
  s.form = PolynomialPlantSpec::ElastanceForm::affine;
  s.base = scalar(mp.c / mp.k);
  s.slopes = {scalar(-1.0 / mp.k)};
  s.R_m = scalar(mp.R_m);
  s.J_e = scalar(0.0);
  s.R_e = scalar(mp.R_e);
  s.G_e = scalar(1.0);
  s.q_upper = vec1(mp.c);
  s.state_scale = Vector(3);
  s.state_scale << 1e-3, 1e-4, 1.0;
  return make_polynomial_plant(s);
}

double mems_equilibrium_charge(const MemsParameters& mp, double q_d) {
  return (mp.c0 + q_d) * std::sqrt(2 * mp.c1 * q_d * (mp.a1 + mp.a2 * q_d * q_d));
}

std::vector<std::string> builtin_plant_names() {
  return {"mems-optical-switch", "maglev"};
}

std::vector<std::string> builtin_plant_parameters(const std::string& name) {
  if (name == "mems-optical-switch") return {"c0", "c1", "m", "a1", "a2", "R_m", "r_e"};
  if (name == "maglev") return {"k", "R_e", "c", "b", "m", "R_m"};
  throw ConfigurationError("unknown built-in plant '" + name + "'");
}

EMPlant make_builtin_plant(const std::string& name,
                           const std::map<std::string, double>& overrides) {
  const auto allowed = builtin_plant_parameters(name);
  for (const auto& [key, value] : overrides) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigurationError("plant '" + name + "' has no parameter '" + key + "'");
    }
  }
  auto get = [&](const char* key, double fallback) {
    auto it = overrides.find(key);
    return it == overrides.end() ? fallback : it->second;
  };
  if (name == "mems-optical-switch") {
    MemsParameters d;
    MemsParameters mp{get("c0", d.c0), get("c1", d.c1), get("m", d.m), get("a1", d.a1),
                      get("a2", d.a2), get("R_m", d.R_m), get("r_e", d.r_e)};
    return make_mems_plant(mp);
  }
  MaglevParameters d;
  MaglevParameters mp{get("k", d.k), get("R_e", d.R_e), get("c", d.c),
                      get("b", d.b), get("m", d.m), get("R_m", d.R_m)};
  return make_maglev_plant(mp);
}

}  // namespace emctl
