#include "emctl/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "emctl/errors.hpp"

namespace emctl {
namespace {

Matrix electrical_operator(const EMPlant& plant, const ClosedLoopShape& shape) {
  return plant.J_e - shape.Rbar_e;
}

Vector velocity(const EMPlant& plant, const Vector& q, const Vector& p) {
  return plant.mass(q).ldlt().solve(p);
}

Vector solve_g(const EMPlant& plant, const Vector& v) {
  return plant.G_e.fullPivLu().solve(v);
}


}  // namespace

std::string to_string(LawKind kind) {
  switch (kind) {
    case LawKind::regulation1: return "regulation-1";
    case LawKind::regulation2: return "regulation-2";
    case LawKind::tracking1: return "tracking-1";
    case LawKind::tracking2: return "tracking-2";
  }
  return "unknown";
}

std::string to_string(ConditionStatus status) {
  switch (status) {
    case ConditionStatus::pass: return "pass";
    case ConditionStatus::fail: return "fail";
    case ConditionStatus::assumed: return "assumed";
  }
  return "unknown";
}

LawKind law_kind_from_string(const std::string& name) {
  for (LawKind k : {LawKind::regulation1, LawKind::regulation2, LawKind::tracking1,
                    LawKind::tracking2}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigurationError("unknown law '" + name +
                           "' (expected regulation-1, regulation-2, tracking-1, tracking-2)");
}

bool uses_mapped_coordinate(LawKind kind) {
  return kind == LawKind::regulation2 || kind == LawKind::tracking2;
}

ClosedLoopShape make_shape(const EMPlant& plant, const Matrix& gamma,
                           const Matrix& d_d, const Matrix& k_e) {
  auto check = [](const Matrix& m, int r, int c, const char* what) {
    if (m.rows() != r || m.cols() != c) {
      std::ostringstream os;
      os << what << " must be " << r << "x" << c << ", got " << m.rows() << "x" << m.cols();
      throw DimensionError(os.str());
    }
  };
  check(gamma, plant.n_m, plant.n_e, "Gamma");
  check(d_d, plant.n_e, plant.n_m, "D_d");
  check(k_e, plant.n_e, plant.n_e, "K_e");
  ClosedLoopShape s{gamma, d_d, k_e, plant.R_e + k_e};
  Eigen::FullPivLU<Matrix> lu(electrical_operator(plant, s));
  if (lu.rank() < plant.n_e) {
    throw ConfigurationError("J_e - Rbar_e is singular; choose K_e so that Rbar_e is invertible");
  }
  return s;
}

Matrix target_structure(const EMPlant& plant, const ClosedLoopShape& shape) {
  const int nm = plant.n_m, ne = plant.n_e;
  Matrix f = Matrix::Zero(plant.state_size(), plant.state_size());
  f.block(0, nm, nm, nm) = Matrix::Identity(nm, nm);
  f.block(nm, 0, nm, nm) = -Matrix::Identity(nm, nm);
  f.block(nm, nm, nm, nm) = -plant.R_m;
  f.block(nm, 2 * nm, nm, ne) = shape.Gamma;
  f.block(2 * nm, nm, ne, nm) = -shape.Gamma.transpose() + shape.D_d;
  f.block(2 * nm, 2 * nm, ne, ne) = electrical_operator(plant, shape);
  return f;
}

Matrix target_interconnection(const EMPlant& plant, const ClosedLoopShape& shape) {
  const Matrix f = target_structure(plant, shape);
  return 0.5 * (f - f.transpose());
}

Matrix target_dissipation(const EMPlant& plant, const ClosedLoopShape& shape) {
  const Matrix f = target_structure(plant, shape);
  return -0.5 * (f + f.transpose());
}

Matrix energy_balance_matrix(const EMPlant& plant, const ClosedLoopShape& shape) {
  const int nm = plant.n_m, ne = plant.n_e;
  Matrix b(nm + ne, nm + ne);
  b << plant.R_m, -0.5 * shape.D_d.transpose(), -0.5 * shape.D_d, shape.Rbar_e;
  return b;
}

Matrix z_jacobian(const EMPlant& plant, const ClosedLoopShape& shape) {
  const Matrix a = electrical_operator(plant, shape);
  const auto lu = a.transpose().fullPivLu();
  if (!lu.isInvertible()) throw ConfigurationError("J_e - Rbar_e is singular");
  return -plant.G_e.transpose() * lu.inverse();
}

Vector z_map(const ClosedLoopShape& shape, const EMPlant& plant, const Vector& q,
             const Vector& x) {
  return z_jacobian(plant, shape) * (shape.Gamma.transpose() * q + x);
}

Vector z_gradient_to_x(const EMPlant& plant, const ClosedLoopShape& shape,
                       const Vector& grad_z) {
  return z_jacobian(plant, shape).transpose() * grad_z;
}

Vector x_gradient_to_z(const EMPlant& plant, const ClosedLoopShape& shape,
                       const Vector& grad_x) {
  return -solve_g(plant, electrical_operator(plant, shape) * grad_x);
}

namespace {

Vector shaped_law(const EMPlant& plant, const ClosedLoopShape& shape,
                  const ShapingFunction& phi, const Vector& eta, double t) {
  const StateView s = split_state(plant, eta);
  require_in_bounds(plant, s.q);
  const Vector v = velocity(plant, s.q, s.p);
  const Vector psi_x = plant.elastance(s.q) * s.x;
  const Vector rhs = electrical_operator(plant, shape) * phi.gradient(s.x, t) -
                     shape.K_e * psi_x + shape.D_d * v;
  return solve_g(plant, rhs);
}

Vector mapped_law(const EMPlant& plant, const ClosedLoopShape& shape,
                  const ShapingFunction& phi, const ShapingFunction& theta,
                  const Vector& eta, double t) {
  const StateView s = split_state(plant, eta);
  require_in_bounds(plant, s.q);
  const Vector v = velocity(plant, s.q, s.p);
  const Vector psi_x = plant.elastance(s.q) * s.x;
  const Vector rhs = (plant.R_e - plant.J_e) * psi_x +
                     (shape.D_d - shape.Gamma.transpose()) * v +
                     electrical_operator(plant, shape) * phi.gradient(s.x, t);
  const Vector z = z_map(shape, plant, s.q, s.x);
  return solve_g(plant, rhs) - theta.gradient(z, t);
}

}  // namespace

Vector regulation_law_1(const EMPlant& plant, const ClosedLoopShape& shape,
                        const ShapingFunction& phi1, const Vector& eta) {
  return shaped_law(plant, shape, phi1, eta, 0.0);
}

Vector regulation_law_2(const EMPlant& plant, const ClosedLoopShape& shape,
                        const ShapingFunction& phi1, const ShapingFunction& phi2_z,
                        const Vector& eta) {
  return mapped_law(plant, shape, phi1, phi2_z, eta, 0.0);
}

Vector tracking_law_1(const EMPlant& plant, const ClosedLoopShape& shape,
                      const ShapingFunction& theta1, const Vector& eta, double t) {
  return shaped_law(plant, shape, theta1, eta, t);
}

Vector tracking_law_2(const EMPlant& plant, const ClosedLoopShape& shape,
                      const ShapingFunction& phi2, const ShapingFunction& theta2,
                      const Vector& eta, double t) {
  return mapped_law(plant, shape, phi2, theta2, eta, t);
}

bool ConditionReport::certified() const {
  if (hard_failure) return false;
  for (const auto& c : conditions) {
    if (c.status == ConditionStatus::fail) return false;
  }
  return true;
}

std::vector<std::string> ConditionReport::failed() const {
  std::vector<std::string> out;
  if (hard_failure) out.push_back("configuration: " + hard_failure_reason);
  for (const auto& c : conditions) {
    if (c.status == ConditionStatus::fail) out.push_back(c.name);
  }
  return out;
}

const Condition* ConditionReport::find(const std::string& name) const {
  for (const auto& c : conditions) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ControllerLaw::ControllerLaw(LawKind kind, EMPlant plant, ClosedLoopShape shape,
                             DesiredTarget target, ShapingFunction primary,
                             std::optional<ShapingFunction> auxiliary)
    : kind_(kind),
      plant_(std::move(plant)),
      shape_(std::move(shape)),
      target_(std::move(target)),
      primary_(std::move(primary)),
      auxiliary_(std::move(auxiliary)) {
  if (uses_mapped_coordinate(kind_) && !auxiliary_) {
    throw ConfigurationError(to_string(kind_) + " needs an auxiliary shaping term");
  }
  const auto want = uses_mapped_coordinate(kind_) ? ShapingFunction::Arity::z
                                                  : ShapingFunction::Arity::electrical;
  if (primary_.arity != want) {
    throw ConfigurationError("primary shaping term has the wrong argument for " +
                             to_string(kind_));
  }
  if (kind_ == LawKind::regulation1 || kind_ == LawKind::regulation2) {
    if (!target_.is_equilibrium()) {
      throw ConfigurationError(to_string(kind_) + " requires an equilibrium target");
    }
    energy_offset_ = -desired_energy(target_.state(0.0), 0.0);
  }
}

Vector ControllerLaw::raw_input(const Vector& eta, double t) const {
  switch (kind_) {
    case LawKind::regulation1: return regulation_law_1(plant_, shape_, primary_, eta);
    case LawKind::regulation2:
      return regulation_law_2(plant_, shape_, *auxiliary_, primary_, eta);
    case LawKind::tracking1: return tracking_law_1(plant_, shape_, primary_, eta, t);
    case LawKind::tracking2:
      return tracking_law_2(plant_, shape_, *auxiliary_, primary_, eta, t);
  }
  throw ConfigurationError("unknown law");
}

bool ControllerLaw::cleared() const {
  return forced_ || (report_ && report_->certified());
}

Vector ControllerLaw::input(const Vector& eta, double t) const {
  if (!cleared()) {
    std::vector<std::string> failed =
        report_ ? report_->failed() : std::vector<std::string>{"not verified"};
    std::ostringstream os;
    os << "refusing to apply uncertified " << to_string(kind_) << " law; failed:";
    for (const auto& f : failed) os << ' ' << f;
    throw RefusalError(os.str(), failed);
  }
  return raw_input(eta, t);
}

void ControllerLaw::attach_report(ConditionReport report, bool force) {
  report_ = std::move(report);
  forced_ = force;
}

namespace {

Vector mechanical_state(const Vector& eta, int n_e) {
  Vector out = eta;
  out.tail(n_e).setZero();
  return out;
}

}  // namespace

double ControllerLaw::desired_energy(const Vector& eta, double t) const {
  const StateView s = split_state(plant_, eta);
  if (!uses_mapped_coordinate(kind_)) {
    return hamiltonian(plant_, eta) + primary_.value(s.x, t) + energy_offset_;
  }
  const double h1 = hamiltonian(plant_, mechanical_state(eta, plant_.n_e));
  const Vector z = z_map(shape_, plant_, s.q, s.x);
  return h1 + primary_.value(z, t) + auxiliary_->value(s.x, t) + energy_offset_;
}

Vector ControllerLaw::desired_gradient(const Vector& eta, double t) const {
  const StateView s = split_state(plant_, eta);
  const int nm = plant_.n_m, ne = plant_.n_e;
  if (!uses_mapped_coordinate(kind_)) {
    Vector g = grad_hamiltonian(plant_, eta);
    g.tail(ne) += primary_.gradient(s.x, t);
    return g;
  }
  Vector g = grad_hamiltonian(plant_, mechanical_state(eta, ne));
  const Vector z = z_map(shape_, plant_, s.q, s.x);
  const Vector gx = z_gradient_to_x(plant_, shape_, primary_.gradient(z, t));
  g.head(nm) += shape_.Gamma * gx;
  g.tail(ne) = gx + auxiliary_->gradient(s.x, t);
  return g;
}

Matrix ControllerLaw::desired_hessian(const Vector& eta, double t) const {
  const StateView s = split_state(plant_, eta);
  const int nm = plant_.n_m, ne = plant_.n_e;
  if (!uses_mapped_coordinate(kind_)) {
    Matrix h = hessian_hamiltonian(plant_, eta);
    h.bottomRightCorner(ne, ne) += primary_.hessian(s.x, t);
    return h;
  }
  Matrix h = hessian_hamiltonian(plant_, mechanical_state(eta, ne));
  h.bottomRightCorner(ne, ne).setZero();
  const Vector z = z_map(shape_, plant_, s.q, s.x);
  const Matrix zx = z_jacobian(plant_, shape_);
  const Matrix hxx = zx.transpose() * primary_.hessian(z, t) * zx;
  h.topLeftCorner(nm, nm) += shape_.Gamma * hxx * shape_.Gamma.transpose();
  h.block(0, 2 * nm, nm, ne) += shape_.Gamma * hxx;
  h.block(2 * nm, 0, ne, nm) += hxx * shape_.Gamma.transpose();
  h.bottomRightCorner(ne, ne) = hxx + auxiliary_->hessian(s.x, t);
  return 0.5 * (h + h.transpose());
}

Matrix ControllerLaw::closed_loop_structure() const {
  if (uses_mapped_coordinate(kind_)) return target_structure(plant_, shape_);
  ClosedLoopShape s = shape_;
  s.Gamma.setZero();
  return target_structure(plant_, s);
}

Vector ControllerLaw::closed_loop_field(const Vector& eta, double t) const {
  return open_loop_field(plant_, eta, raw_input(eta, t));
}

Vector ControllerLaw::target_field(const Vector& eta, double t) const {
  return closed_loop_structure() * desired_gradient(eta, t);
}

double coupling_linearity_residual(const EMPlant& plant, const ClosedLoopShape& shape,
                                   const ShapingFunction& phi,
                                   const std::vector<Vector>& states) {
  double worst = 0.0;
  for (const auto& eta : states) {
    const StateView s = split_state(plant, eta);
    if (!plant.q_in_bounds(s.q)) continue;
    const Vector a = coupling_energy_gradient_q(plant, s.q, s.x);
    const Vector b = shape.Gamma * phi.gradient(s.x, 0.0);
    const double scale = std::max({a.norm(), b.norm(), 1e-300});
    worst = std::max(worst, (a + b).norm() / scale);
  }
  return worst;
}

ControllerLaw make_controller(LawKind kind, const EMPlant& plant,
                              const ClosedLoopShape& shape, const DesiredTarget& target,
                              const ShapingChoice& shaping) {
  const int nm = plant.n_m, ne = plant.n_e;
  const Matrix k = shaping.gain.size() ? shaping.gain : Matrix::Identity(ne, ne);
  if (k.rows() != ne || k.cols() != ne) {
    throw DimensionError("shaping gain must be n_e x n_e");
  }
  const Eigen::FullPivLU<Matrix> k_lu(k);
  if (k_lu.rank() < ne) throw ConfigurationError("shaping gain must be invertible");
  const bool moving = !target.is_equilibrium();
  const Matrix a = electrical_operator(plant, shape);

  std::optional<ShapingFunction> aux;
  if (uses_mapped_coordinate(kind)) {
    aux = shaping.auxiliary ? *shaping.auxiliary : cubic_shaping(Vector::Ones(ne));
    // Sampled check that ∇_q H_e = −Γ∇φ near the target.
    std::vector<Vector> states;
    for (double t : {0.0, 0.1, 0.25, 0.5, 1.0}) {
      const Vector eta = target.state(t);
      for (double fq : {0.9, 1.0, 1.1}) {
        for (double fx : {0.5, 1.0, 1.5}) {
          Vector e = eta;
          e.head(nm) *= fq;
          e.tail(ne) *= fx;
          states.push_back(e);
        }
      }
    }
    const double res = coupling_linearity_residual(plant, shape, *aux, states);
    if (res > 1e-8) {
      std::ostringstream os;
      os << to_string(kind) << ": coupling energy is not of the form -Gamma grad phi "
         << "(relative residual " << res << ")";
      throw ModelMismatchError(os.str(), res);
    }
  }

  ShapingFunction primary;
  if (shaping.primary) {
    primary = *shaping.primary;
  } else if (!uses_mapped_coordinate(kind)) {
    // ∇Θ(x⋆) = (J−R̄)⁻¹(ẋ⋆ − D_d M⁻¹p⋆) − Ψ(q⋆)x⋆
    auto center = [plant, shape, target, k, a, nm, ne](double t) {
      const Vector eta = target.state(t);
      const Vector rate = target.rate(t);
      const Vector q = eta.head(nm), p = eta.segment(nm, nm), x = eta.tail(ne);
      const Vector v = velocity(plant, q, p);
      const Vector g = a.fullPivLu().solve(rate.tail(ne) - shape.D_d * v) -
                       plant.elastance(q) * x;
      return Vector(x - k.fullPivLu().solve(g));
    };
    if (moving) {
      primary = quadratic_shaping(ShapingFunction::Arity::electrical, k, center, true);
    } else {
      const Vector c = center(0.0);
      primary = quadratic_shaping(ShapingFunction::Arity::electrical, k,
                                  [c](double) { return c; }, false);
    }
  } else {
    // G_e∇_zΘ(z⋆) = (D_d−Γᵀ)M⁻¹p⋆ + (J−R̄)∇φ(x⋆) − ẋ⋆
    const ShapingFunction phi = *aux;
    auto center = [plant, shape, target, k, a, phi, nm, ne](double t) {
      const Vector eta = target.state(t);
      const Vector rate = target.rate(t);
      const Vector q = eta.head(nm), p = eta.segment(nm, nm), x = eta.tail(ne);
      const Vector v = velocity(plant, q, p);
      const Vector h = (shape.D_d - shape.Gamma.transpose()) * v + a * phi.gradient(x, t) -
                       rate.tail(ne);
      const Vector z = z_map(shape, plant, q, x);
      return Vector(z - k.fullPivLu().solve(solve_g(plant, h)));
    };
    if (moving) {
      primary = quadratic_shaping(ShapingFunction::Arity::z, k, center, true);
    } else {
      const Vector c = center(0.0);
      primary = quadratic_shaping(ShapingFunction::Arity::z, k,
                                  [c](double) { return c; }, false);
    }
  }
  return ControllerLaw(kind, plant, shape, target, std::move(primary), std::move(aux));
}

}  // namespace emctl
