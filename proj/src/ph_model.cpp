#include "emctl/ph_model.hpp"

#include <cmath>
#include <sstream>

#include "emctl/errors.hpp"

namespace emctl {
namespace {

double fd_step(const EMPlant& plant, const Vector& q, int k) {
  double s = plant.state_scale.size() > k ? plant.state_scale(k) : 1.0;
  return 1e-6 * std::max(std::abs(q(k)), s);
}

void require_size(const Vector& v, int n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << " must have " << n << " entries, got " << v.size();
    throw DimensionError(os.str());
  }
}

}  // namespace

bool EMPlant::uses_finite_differences() const {
  return !potential_gradient || !potential_hessian || !elastance_derivative ||
         !elastance_second_derivative;
}

bool EMPlant::q_in_bounds(const Vector& q) const {
  for (int i = 0; i < n_m; ++i) {
    if (q_lower.size() == n_m && !(q(i) > q_lower(i))) return false;
    if (q_upper.size() == n_m && !(q(i) < q_upper(i))) return false;
  }
  return q.allFinite();
}

void EMPlant::validate() const {
  if (n_m <= 0 || n_e <= 0) throw ConfigurationError("plant dimensions must be positive");
  if (!mass || !potential || !elastance) {
    throw ConfigurationError("plant '" + name +
                             "' needs mass, potential and elastance callbacks");
  }
  auto check = [](const Matrix& m, int r, int c, const char* what) {
    if (m.rows() != r || m.cols() != c) {
      std::ostringstream os;
      os << what << " must be " << r << "x" << c << ", got " << m.rows() << "x"
         << m.cols();
      throw DimensionError(os.str());
    }
  };
  check(R_m, n_m, n_m, "R_m");
  check(J_e, n_e, n_e, "J_e");
  check(R_e, n_e, n_e, "R_e");
  check(G_e, n_e, n_e, "G_e");
  if ((J_e + J_e.transpose()).norm() > 1e-12 * (1.0 + J_e.norm())) {
    throw ConfigurationError("J_e must be skew-symmetric");
  }
  if (!linalg::is_positive_semidefinite(R_m)) throw ConfigurationError("R_m must be PSD");
  if (!linalg::is_positive_semidefinite(R_e)) throw ConfigurationError("R_e must be PSD");
  if (Eigen::FullPivLU<Matrix>(G_e).rank() < n_e) {
    throw ConfigurationError("G_e must be invertible");
  }
  if (state_scale.size() != state_size()) {
    throw ConfigurationError("state_scale must have 2 n_m + n_e entries");
  }
}

StateView split_state(const EMPlant& plant, const Vector& eta) {
  require_size(eta, plant.state_size(), "state");
  return {eta.head(plant.n_m), eta.segment(plant.n_m, plant.n_m),
          eta.tail(plant.n_e)};
}

Vector join_state(const Vector& q, const Vector& p, const Vector& x) {
  Vector eta(q.size() + p.size() + x.size());
  eta << q, p, x;
  return eta;
}

void require_in_bounds(const EMPlant& plant, const Vector& q) {
  if (!plant.q_in_bounds(q)) {
    std::ostringstream os;
    os << "q = " << q.transpose() << " outside the domain of plant '"
       << plant.name << "'";
    throw DomainError(os.str());
  }
}

Matrix elastance_derivative(const EMPlant& plant, const Vector& q, int k) {
  if (plant.elastance_derivative) return plant.elastance_derivative(q, k);
  const double h = fd_step(plant, q, k);
  Vector qp = q, qm = q;
  qp(k) += h;
  qm(k) -= h;
  return (plant.elastance(qp) - plant.elastance(qm)) / (2 * h);
}

Matrix elastance_second_derivative(const EMPlant& plant, const Vector& q,
                                   int k, int l) {
  if (plant.elastance_second_derivative) {
    return plant.elastance_second_derivative(q, k, l);
  }
  const double h = fd_step(plant, q, l);
  Vector qp = q, qm = q;
  qp(l) += h;
  qm(l) -= h;
  return (elastance_derivative(plant, qp, k) - elastance_derivative(plant, qm, k)) /
         (2 * h);
}

Vector potential_gradient(const EMPlant& plant, const Vector& q) {
  if (plant.potential_gradient) return plant.potential_gradient(q);
  Vector g(plant.n_m);
  for (int k = 0; k < plant.n_m; ++k) {
    const double h = fd_step(plant, q, k);
    Vector qp = q, qm = q;
    qp(k) += h;
    qm(k) -= h;
    g(k) = (plant.potential(qp) - plant.potential(qm)) / (2 * h);
  }
  return g;
}

Matrix potential_hessian(const EMPlant& plant, const Vector& q) {
  if (plant.potential_hessian) return plant.potential_hessian(q);
  Matrix hess(plant.n_m, plant.n_m);
  for (int k = 0; k < plant.n_m; ++k) {
    const double h = fd_step(plant, q, k);
    Vector qp = q, qm = q;
    qp(k) += h;
    qm(k) -= h;
    hess.col(k) = (potential_gradient(plant, qp) - potential_gradient(plant, qm)) / (2 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

double coupling_energy(const EMPlant& plant, const Vector& q, const Vector& x) {
  require_in_bounds(plant, q);
  return 0.5 * x.dot(plant.elastance(q) * x);
}

Vector coupling_energy_gradient_q(const EMPlant& plant, const Vector& q,
                                  const Vector& x) {
  require_in_bounds(plant, q);
  Vector g(plant.n_m);
  for (int k = 0; k < plant.n_m; ++k) {
    g(k) = 0.5 * x.dot(elastance_derivative(plant, q, k) * x);
  }
  return g;
}

namespace {

Vector kinetic_gradient_q(const EMPlant& plant, const Vector& q, const Vector& p,
                          const Eigen::LDLT<Matrix>& mass) {
  Vector g = Vector::Zero(plant.n_m);
  if (!plant.mass_derivative) return g;
  const Vector v = mass.solve(p);
  for (int k = 0; k < plant.n_m; ++k) {
    g(k) = -0.5 * v.dot(plant.mass_derivative(q, k) * v);
  }
  return g;
}

}  // namespace

double hamiltonian(const EMPlant& plant, const Vector& eta) {
  const StateView s = split_state(plant, eta);
  require_in_bounds(plant, s.q);
  const Eigen::LDLT<Matrix> mass(plant.mass(s.q));
  return 0.5 * s.p.dot(mass.solve(s.p)) + plant.potential(s.q) +
         0.5 * s.x.dot(plant.elastance(s.q) * s.x);
}

Vector grad_hamiltonian(const EMPlant& plant, const Vector& eta) {
  const StateView s = split_state(plant, eta);
  require_in_bounds(plant, s.q);
  const Eigen::LDLT<Matrix> mass(plant.mass(s.q));
  Vector g(plant.state_size());
  g.head(plant.n_m) = potential_gradient(plant, s.q) +
                      coupling_energy_gradient_q(plant, s.q, s.x) +
                      kinetic_gradient_q(plant, s.q, s.p, mass);
  g.segment(plant.n_m, plant.n_m) = mass.solve(s.p);
  g.tail(plant.n_e) = plant.elastance(s.q) * s.x;
  return g;
}

Matrix hessian_hamiltonian(const EMPlant& plant, const Vector& eta) {
  const StateView s = split_state(plant, eta);
  require_in_bounds(plant, s.q);
  const int nm = plant.n_m, ne = plant.n_e, n = plant.state_size();
  Matrix hess = Matrix::Zero(n, n);
  const Matrix m = plant.mass(s.q);
  const Eigen::LDLT<Matrix> mass(m);

  Matrix hqq = potential_hessian(plant, s.q);
  for (int k = 0; k < nm; ++k) {
    for (int l = 0; l < nm; ++l) {
      hqq(k, l) += 0.5 * s.x.dot(elastance_second_derivative(plant, s.q, k, l) * s.x);
    }
    hess.block(k, 2 * nm, 1, ne) =
        (elastance_derivative(plant, s.q, k) * s.x).transpose();
  }
  hess.block(0, 0, nm, nm) = hqq;
  hess.block(nm, nm, nm, nm) = mass.solve(Matrix::Identity(nm, nm));
  hess.block(2 * nm, 2 * nm, ne, ne) = plant.elastance(s.q);

  if (plant.mass_derivative) {
    // q-dependent mass: differentiate the analytic kinetic gradients.
    for (int l = 0; l < nm; ++l) {
      const double h = fd_step(plant, s.q, l);
      Vector qp = s.q, qm = s.q;
      qp(l) += h;
      qm(l) -= h;
      const Eigen::LDLT<Matrix> mp(plant.mass(qp)), mm(plant.mass(qm));
      hess.block(0, l, nm, 1) +=
          (kinetic_gradient_q(plant, qp, s.p, mp) - kinetic_gradient_q(plant, qm, s.p, mm)) /
          (2 * h);
      hess.block(nm, l, nm, 1) += (mp.solve(s.p) - mm.solve(s.p)) / (2 * h);
    }
    hess.block(0, nm, nm, nm) = hess.block(nm, 0, nm, nm).transpose();
  }
  hess.block(2 * nm, 0, ne, nm) = hess.block(0, 2 * nm, nm, ne).transpose();
  return 0.5 * (hess + hess.transpose());
}

Matrix open_loop_structure(const EMPlant& plant) {
  const int nm = plant.n_m, ne = plant.n_e, n = plant.state_size();
  Matrix f = Matrix::Zero(n, n);
  f.block(0, nm, nm, nm) = Matrix::Identity(nm, nm);
  f.block(nm, 0, nm, nm) = -Matrix::Identity(nm, nm);
  f.block(nm, nm, nm, nm) = -plant.R_m;
  f.block(2 * nm, 2 * nm, ne, ne) = plant.J_e - plant.R_e;
  return f;
}

Matrix input_matrix(const EMPlant& plant) {
  Matrix g = Matrix::Zero(plant.state_size(), plant.n_e);
  g.bottomRows(plant.n_e) = plant.G_e;
  return g;
}

Vector open_loop_field(const EMPlant& plant, const Vector& eta, const Vector& u) {
  require_size(u, plant.n_e, "input u");
  const Vector g = grad_hamiltonian(plant, eta);
  const int nm = plant.n_m, ne = plant.n_e;
  Vector f(plant.state_size());
  f.head(nm) = g.segment(nm, nm);
  f.segment(nm, nm) = -g.head(nm) - plant.R_m * g.segment(nm, nm);
  f.tail(ne) = (plant.J_e - plant.R_e) * g.tail(ne) + plant.G_e * u;
  return f;
}

Vector field_term_scale(const EMPlant& plant, const Vector& eta, const Vector& u) {
  const StateView s = split_state(plant, eta);
  Vector g = grad_hamiltonian(plant, eta).cwiseAbs();
  const Eigen::LDLT<Matrix> mass(plant.mass(s.q));
  g.head(plant.n_m) = potential_gradient(plant, s.q).cwiseAbs() +
                      coupling_energy_gradient_q(plant, s.q, s.x).cwiseAbs() +
                      kinetic_gradient_q(plant, s.q, s.p, mass).cwiseAbs();
  return open_loop_structure(plant).cwiseAbs() * g +
         input_matrix(plant).cwiseAbs() * u.cwiseAbs();
}

Vector output(const EMPlant& plant, const Vector& eta) {
  return plant.G_e.transpose() * grad_hamiltonian(plant, eta).tail(plant.n_e);
}

EquilibriumCheck assignable_equilibrium_check(const EMPlant& plant,
                                              const Vector& eta_d, double tol) {
  const StateView s = split_state(plant, eta_d);
  EquilibriumCheck out;
  out.residual = grad_hamiltonian(plant, eta_d).head(plant.n_m).norm();
  out.momentum = s.p.norm();
  if (tol < 0.0) {
    // Force scale: magnitude of the individual force terms at η_d.
    const double scale = potential_gradient(plant, s.q).norm() +
                         coupling_energy_gradient_q(plant, s.q, s.x).norm();
    tol = 1e-9 * std::max(scale, 1e-300);
  }
  out.assignable = out.residual <= tol && out.momentum == 0.0;
  return out;
}

Vector equilibrium_input(const EMPlant& plant, const Vector& eta_d) {
  const StateView s = split_state(plant, eta_d);
  require_in_bounds(plant, s.q);
  const Vector drift = (plant.J_e - plant.R_e) * plant.elastance(s.q) * s.x;
  return -plant.G_e.fullPivLu().solve(drift);
}

DesiredTarget constant_target(const Vector& eta_d) {
  DesiredTarget t;
  t.kind = DesiredTarget::Kind::equilibrium;
  t.state = [eta_d](double) { return eta_d; };
  const Eigen::Index n = eta_d.size();
  t.rate = [n](double) { return Vector(Vector::Zero(n)); };
  t.description = "equilibrium";
  return t;
}

namespace {

struct FeasibilityTerms {
  Vector rate, drift, input;
};

FeasibilityTerms feasibility_terms(const EMPlant& plant, const DesiredTarget& target,
                                   const std::function<Vector(double)>& u_star,
                                   double t) {
  if (!target.state || !target.rate) {
    throw ConfigurationError("target lacks state/derivative callbacks");
  }
  const Vector eta = target.state(t);
  FeasibilityTerms out;
  out.rate = target.rate(t);
  out.drift = open_loop_structure(plant) * grad_hamiltonian(plant, eta);
  out.input = input_matrix(plant) * u_star(t);
  return out;
}

}  // namespace

double feasibility_residual(const EMPlant& plant, const DesiredTarget& target,
                            const std::function<Vector(double)>& u_star, double t) {
  const auto terms = feasibility_terms(plant, target, u_star, t);
  return (terms.rate - terms.drift - terms.input).norm();
}

double feasibility_residual_relative(const EMPlant& plant,
                                     const DesiredTarget& target,
                                     const std::function<Vector(double)>& u_star,
                                     double t) {
  const auto terms = feasibility_terms(plant, target, u_star, t);
  const Vector r = terms.rate - terms.drift - terms.input;
  const Vector pieces = field_term_scale(plant, target.state(t), u_star(t));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double scale = std::abs(terms.rate(i)) + pieces(i) + 1e-300;
    worst = std::max(worst, std::abs(r(i)) / scale);
  }
  return worst;
}

}  // namespace emctl
