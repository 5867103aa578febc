#pragma once

#include <complex>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace emctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

inline constexpr double kHurwitzTolerance = 1e-10;
inline constexpr double kDefinitenessTolerance = 1e-12;

struct SpectralReport {
  std::vector<std::complex<double>> eigenvalues;
  double max_real_part = 0.0;
  double min_real_part = 0.0;
  double tolerance_used = 0.0;
};

struct HurwitzResult {
  SpectralReport report;
  bool hurwitz = false;
  explicit operator bool() const { return hurwitz; }
};

void require_square(const Matrix& a, std::string_view what);

/// (A + Aᵀ)/2. Warns when A is asymmetric beyond 1e-8 relative.
Matrix symmetrize(const Matrix& a, std::string_view what = "matrix");
double relative_asymmetry(const Matrix& a);

SpectralReport spectrum(const Matrix& a, double tol = 0.0);
/// Largest |p(λ)| over the computed eigenvalues, p the characteristic
/// polynomial evaluated as det(A − λI).
double characteristic_residual(const Matrix& a, const SpectralReport& report);

double min_symmetric_eigenvalue(const Matrix& a);
double max_symmetric_eigenvalue(const Matrix& a);

bool is_positive_definite(const Matrix& a, double tol = kDefinitenessTolerance);
bool is_positive_semidefinite(const Matrix& a,
                              double tol = kDefinitenessTolerance);

HurwitzResult is_hurwitz(const Matrix& a, double tol = kHurwitzTolerance);

double default_imaginary_axis_tolerance(const Matrix& a);
bool has_imaginary_axis_eigenvalue(const Matrix& a, double tol);
bool has_imaginary_axis_eigenvalue(const Matrix& a);
/// min |Re λ| over the spectrum.
double imaginary_axis_margin(const Matrix& a);

/// R_m − ¼ D_dᵀ R̄_e⁻¹ D_d.
Matrix ph_structure_schur(const Matrix& r_m, const Matrix& d_d,
                          const Matrix& rbar_e);
bool ph_structure_condition(const Matrix& r_m, const Matrix& d_d,
                            const Matrix& rbar_e, bool strict,
                            double tol = kDefinitenessTolerance);

struct RiccatiSolution {
  Matrix omega;
  double residual = 0.0;           // Frobenius norm of the equation residual
  double relative_residual = 0.0;  // residual / scale of the terms
  std::optional<Matrix> alternative;
  int positive_definite_solutions = 0;
};

/// ΩF + FᵀΩ + (γ+ε)I + γΩFFᵀΩ = 0.
Matrix riccati_residual(const Matrix& f, double gamma, double eps,
                        const Matrix& omega);
double riccati_relative_residual(const Matrix& f, double gamma, double eps,
                                 const Matrix& omega);
RiccatiSolution solve_riccati(const Matrix& f, double gamma, double eps);

/// σ = β₃ε/λmax(Ω).
double convergence_rate_sigma(const Matrix& omega, double beta3, double eps);
/// β₃ε·λmax(Ω⁻¹) = β₃ε/λmin(Ω), the bound as literally written.
double convergence_rate_sigma_literal(const Matrix& omega, double beta3,
                                      double eps);

/// Upper-triangular ω with Ω = ωᵀω.
Matrix metric_factor(const Matrix& omega);

/// Solves AᵀX + XA = −C for symmetric X.
Matrix solve_lyapunov(const Matrix& a, const Matrix& c);

}  // namespace linalg
}  // namespace emctl
