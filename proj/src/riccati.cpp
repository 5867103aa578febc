#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <vector>

#include "emctl/errors.hpp"
#include "emctl/matrix_analysis.hpp"

namespace emctl::linalg {
namespace {

constexpr double kAcceptRelativeResidual = 1e-9;

double residual_scale(const Matrix& f, double gamma, double eps,
                      const Matrix& omega) {
  const Eigen::Index n = f.rows();
  const Matrix of = omega * f;
  return 2.0 * of.norm() + (gamma + eps) * std::sqrt(static_cast<double>(n)) +
         gamma * (of * of.transpose()).norm();
}

Matrix hamiltonian_matrix(const Matrix& f, double gamma, double eps) {
  const Eigen::Index n = f.rows();
  Matrix h(2 * n, 2 * n);
  h << f, gamma * f * f.transpose(),
      -(gamma + eps) * Matrix::Identity(n, n), -f.transpose();
  return h;
}

// Stable invariant subspace via the scaled Newton iteration for sign(H).
std::optional<Matrix> sign_function_solution(const Matrix& h) {
  const Eigen::Index n2 = h.rows();
  const Eigen::Index n = n2 / 2;
  Matrix z = h;
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Matrix> lu(z);
    const double det = std::abs(lu.determinant());
    if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;
    const double c = std::pow(det, 1.0 / static_cast<double>(n2));
    Matrix next = 0.5 * (z / c + c * lu.inverse());
    const double change = (next - z).norm();
    z = std::move(next);
    if (!z.allFinite()) return std::nullopt;
    if (change <= 1e-13 * z.norm()) {
      converged = true;
      break;
    }
  }
  if (!converged) return std::nullopt;
  const Matrix eye = Matrix::Identity(n, n);
  Matrix lhs(n2, n);
  lhs << z.topRightCorner(n, n), z.bottomRightCorner(n, n) + eye;
  Matrix rhs(n2, n);
  rhs << -(z.topLeftCorner(n, n) + eye), -z.bottomLeftCorner(n, n);
  Matrix x = lhs.colPivHouseholderQr().solve(rhs);
  if (!x.allFinite()) return std::nullopt;
  return Matrix(0.5 * (x + x.transpose()));
}

std::vector<Matrix> eigenvector_solutions(const Matrix& h) {
  const Eigen::Index n2 = h.rows();
  const Eigen::Index n = n2 / 2;
  std::vector<Matrix> out;
  Eigen::EigenSolver<Matrix> solver(h, true);
  if (solver.info() != Eigen::Success) return out;
  const Eigen::MatrixXcd v = solver.eigenvectors();
  for (unsigned mask = 0; mask < (1u << n2); ++mask) {
    if (std::popcount(mask) != static_cast<int>(n)) continue;
    Eigen::MatrixXcd v1(n, n), v2(n, n);
    Eigen::Index col = 0;
    for (Eigen::Index k = 0; k < n2; ++k) {
      if (mask & (1u << k)) {
        v1.col(col) = v.col(k).head(n);
        v2.col(col) = v.col(k).tail(n);
        ++col;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(v1);
    if (!lu.isInvertible()) continue;
    Eigen::MatrixXcd x = v2 * lu.inverse();
    if (!x.allFinite()) continue;
    const double re = x.real().norm();
    if (x.imag().norm() > 1e-8 * std::max(re, 1e-300)) continue;
    Matrix xr = x.real();
    out.push_back(0.5 * (xr + xr.transpose()));
  }
  return out;
}

Matrix newton_refine(const Matrix& f, double gamma, double eps, Matrix x) {
  const Matrix g = gamma * f * f.transpose();
  double res = riccati_relative_residual(f, gamma, eps, x);
  for (int it = 0; it < 20 && res > 1e-15; ++it) {
    const Matrix a = f + g * x;
    Matrix next;
    try {
      next = x + solve_lyapunov(a, riccati_residual(f, gamma, eps, x));
    } catch (const NumericError&) {
      break;
    }
    const double next_res = riccati_relative_residual(f, gamma, eps, next);
    if (!(next_res < res)) break;
    x = std::move(next);
    res = next_res;
  }
  return x;
}

}  // namespace

Matrix riccati_residual(const Matrix& f, double gamma, double eps,
                        const Matrix& omega) {
  const Eigen::Index n = f.rows();
  const Matrix of = omega * f;
  return of + of.transpose() + (gamma + eps) * Matrix::Identity(n, n) +
         gamma * of * of.transpose();
}

double riccati_relative_residual(const Matrix& f, double gamma, double eps,
                                 const Matrix& omega) {
  return riccati_residual(f, gamma, eps, omega).norm() /
         residual_scale(f, gamma, eps, omega);
}

RiccatiSolution solve_riccati(const Matrix& f, double gamma, double eps) {
  require_square(f, "F_d");
  if (!f.allFinite()) throw NumericError("F_d has non-finite entries");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ConfigurationError("Riccati gamma must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigurationError("Riccati eps must be positive");
  if (!is_hurwitz(f).hurwitz) {
    throw InfeasibleError("Riccati solve requires a Hurwitz F_d");
  }
  const Eigen::Index n = f.rows();

  std::vector<Matrix> candidates;
  if (gamma == 0.0) {
    candidates.push_back(
        solve_lyapunov(f, eps * Matrix::Identity(n, n)));
  } else {
    const Matrix h = hamiltonian_matrix(f, gamma, eps);
    if (auto x = sign_function_solution(h)) candidates.push_back(*x);
    if (n <= 6) {
      for (auto& x : eigenvector_solutions(h)) candidates.push_back(x);
    }
  }

  std::vector<Matrix> accepted;
  for (auto& x0 : candidates) {
    Matrix x = gamma == 0.0 ? x0 : newton_refine(f, gamma, eps, x0);
    if (riccati_relative_residual(f, gamma, eps, x) > kAcceptRelativeResidual)
      continue;
    if (!is_positive_definite(x, 0.0)) continue;
    bool duplicate = false;
    for (const auto& y : accepted) {
      if ((x - y).norm() <= 1e-8 * std::max(x.norm(), y.norm())) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) accepted.push_back(std::move(x));
  }
  if (accepted.empty()) {
    std::ostringstream os;
    os << "Riccati equation has no positive definite solution for gamma="
       << gamma << ", eps=" << eps << "; reduce eps";
    throw InfeasibleError(os.str());
  }
  std::vector<double> lmax;
  for (const auto& x : accepted) lmax.push_back(max_symmetric_eigenvalue(x));
  std::vector<std::size_t> order(accepted.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lmax[a] < lmax[b]; });

  RiccatiSolution sol;
  sol.omega = accepted[order[0]];
  sol.residual = riccati_residual(f, gamma, eps, sol.omega).norm();
  sol.relative_residual = riccati_relative_residual(f, gamma, eps, sol.omega);
  sol.positive_definite_solutions = static_cast<int>(accepted.size());
  if (accepted.size() > 1) sol.alternative = accepted[order[1]];
  return sol;
}

}  // namespace emctl::linalg
