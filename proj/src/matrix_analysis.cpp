#include "emctl/matrix_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "emctl/errors.hpp"

namespace emctl::linalg {
namespace {

void require_finite(const Matrix& a, std::string_view what) {
  if (!a.allFinite()) {
    throw NumericError(std::string(what) + " has non-finite entries");
  }
}

}  // namespace

void require_square(const Matrix& a, std::string_view what) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw DimensionError(std::string(what) + " is empty");
  }
  if (a.rows() != a.cols()) {
    std::ostringstream os;
    os << what << " must be square, got " << a.rows() << "x" << a.cols();
    throw DimensionError(os.str());
  }
}

double relative_asymmetry(const Matrix& a) {
  const double scale = a.norm();
  if (scale == 0.0) return 0.0;
  return (a - a.transpose()).norm() / scale;
}

Matrix symmetrize(const Matrix& a, std::string_view what) {
  require_square(a, what);
  require_finite(a, what);
  const double asym = relative_asymmetry(a);
  if (asym > 1e-8) {
    std::ostringstream os;
    os << what << " is asymmetric (relative " << asym << "); symmetrizing";
    log_warning(os.str());
  }
  return 0.5 * (a + a.transpose());
}

SpectralReport spectrum(const Matrix& a, double tol) {
  require_square(a, "matrix");
  require_finite(a, "matrix");
  Eigen::EigenSolver<Matrix> solver;
  solver.compute(a, false);
  if (solver.info() != Eigen::Success) {
    throw NumericError("eigenvalue iteration did not converge",
                       solver.getMaxIterations() * static_cast<int>(a.rows()));
  }
  SpectralReport report;
  report.tolerance_used = tol;
  const auto& ev = solver.eigenvalues();
  report.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  report.max_real_part = -std::numeric_limits<double>::infinity();
  report.min_real_part = std::numeric_limits<double>::infinity();
  for (const auto& l : report.eigenvalues) {
    report.max_real_part = std::max(report.max_real_part, l.real());
    report.min_real_part = std::min(report.min_real_part, l.real());
  }
  return report;
}

double characteristic_residual(const Matrix& a,
                               const SpectralReport& report) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXcd ac = a.cast<std::complex<double>>();
  double worst = 0.0;
  for (const auto& l : report.eigenvalues) {
    Eigen::MatrixXcd shifted =
        ac - l * Eigen::MatrixXcd::Identity(n, n);
    worst = std::max(worst, std::abs(shifted.partialPivLu().determinant()));
  }
  return worst;
}

double min_symmetric_eigenvalue(const Matrix& a) {
  Matrix s = symmetrize(a);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericError("symmetric eigenvalue iteration did not converge");
  }
  return solver.eigenvalues()(0);
}

double max_symmetric_eigenvalue(const Matrix& a) {
  Matrix s = symmetrize(a);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericError("symmetric eigenvalue iteration did not converge");
  }
  return solver.eigenvalues()(s.rows() - 1);
}

bool is_positive_definite(const Matrix& a, double tol) {
  return min_symmetric_eigenvalue(a) > tol;
}

bool is_positive_semidefinite(const Matrix& a, double tol) {
  return min_symmetric_eigenvalue(a) >= -tol;
}

HurwitzResult is_hurwitz(const Matrix& a, double tol) {
  HurwitzResult result;
  result.report = spectrum(a, tol);
  result.hurwitz = result.report.max_real_part < -tol;
  return result;
}

double default_imaginary_axis_tolerance(const Matrix& a) {
  return 1e-9 * (1.0 + a.norm());
}

double imaginary_axis_margin(const Matrix& a) {
  const SpectralReport report = spectrum(a);
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& l : report.eigenvalues) {
    margin = std::min(margin, std::abs(l.real()));
  }
  return margin;
}

bool has_imaginary_axis_eigenvalue(const Matrix& a, double tol) {
  return imaginary_axis_margin(a) <= tol;
}

bool has_imaginary_axis_eigenvalue(const Matrix& a) {
  return has_imaginary_axis_eigenvalue(a, default_imaginary_axis_tolerance(a));
}

Matrix ph_structure_schur(const Matrix& r_m, const Matrix& d_d,
                          const Matrix& rbar_e) {
  require_square(r_m, "R_m");
  require_square(rbar_e, "Rbar_e");
  if (d_d.rows() != rbar_e.rows() || d_d.cols() != r_m.rows()) {
    std::ostringstream os;
    os << "D_d must be " << rbar_e.rows() << "x" << r_m.rows() << ", got "
       << d_d.rows() << "x" << d_d.cols();
    throw DimensionError(os.str());
  }
  Matrix rbar = symmetrize(rbar_e, "Rbar_e");
  Eigen::LLT<Matrix> llt(rbar);
  if (llt.info() != Eigen::Success ||
      min_symmetric_eigenvalue(rbar) <= kDefinitenessTolerance) {
    throw DefinitenessError("Rbar_e is not positive definite");
  }
  return symmetrize(r_m, "R_m") - 0.25 * d_d.transpose() * llt.solve(d_d);
}

bool ph_structure_condition(const Matrix& r_m, const Matrix& d_d,
                            const Matrix& rbar_e, bool strict, double tol) {
  const Matrix schur = ph_structure_schur(r_m, d_d, rbar_e);
  return strict ? is_positive_definite(schur, tol)
                : is_positive_semidefinite(schur, tol);
}

double convergence_rate_sigma(const Matrix& omega, double beta3, double eps) {
  if (!(beta3 > 0.0) || !(eps > 0.0)) {
    throw ConfigurationError("beta3 and eps must be positive");
  }
  if (!is_positive_definite(omega, 0.0)) {
    throw DefinitenessError("Omega is not positive definite");
  }
  return beta3 * eps / max_symmetric_eigenvalue(omega);
}

double convergence_rate_sigma_literal(const Matrix& omega, double beta3,
                                      double eps) {
  if (!is_positive_definite(omega, 0.0)) {
    throw DefinitenessError("Omega is not positive definite");
  }
  return beta3 * eps / min_symmetric_eigenvalue(omega);
}

Matrix metric_factor(const Matrix& omega) {
  Matrix s = symmetrize(omega, "Omega");
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw DefinitenessError("Omega is not positive definite");
  }
  return llt.matrixU();
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& c) {
  require_square(a, "A");
  const Eigen::Index n = a.rows();
  const Matrix eye = Matrix::Identity(n, n);
  // vec(AᵀX + XA) = (I⊗Aᵀ + Aᵀ⊗I) vec(X)
  Matrix k = Matrix::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) += eye(i, j) * a.transpose();
      k.block(i * n, j * n, n, n) += a(j, i) * eye;
    }
  }
  Eigen::FullPivLU<Matrix> lu(k);
  if (!lu.isInvertible()) {
    throw NumericError("Lyapunov operator is singular");
  }
  Vector rhs = -Eigen::Map<const Vector>(c.data(), n * n);
  Vector x = lu.solve(rhs);
  Matrix out = Eigen::Map<Matrix>(x.data(), n, n);
  return 0.5 * (out + out.transpose());
}

}  // namespace emctl::linalg
