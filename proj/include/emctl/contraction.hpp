#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "emctl/controllers.hpp"
#include "emctl/matrix_analysis.hpp"
#include "emctl/ph_model.hpp"

namespace emctl {

/// Box in state space sampled on a tensor grid, plus sample times.
struct SamplingRegion {
  Vector lower;
  Vector upper;
  int points_per_dim = 9;
  std::vector<double> times{0.0};

  int dimension() const { return static_cast<int>(lower.size()); }
  /// Throws ConfigurationError when empty or inverted.
  void validate() const;
  /// Grid points in lexicographic order, first coordinate fastest.
  std::vector<Vector> grid() const;
  bool contains(const Vector& eta) const;
};

/// Box spanning the target over [0, horizon] widened by half its range per
/// coordinate (or by max(|centre|, scale) where the range is zero), clipped to
/// the plant's q bounds.
SamplingRegion region_around(const EMPlant& plant, const DesiredTarget& target,
                             double horizon, int points_per_dim = 9,
                             int time_samples = 9);

using HessianEvaluator = std::function<Matrix(const Vector& eta, double t)>;

/// Extreme eigenvalues of a Hessian over a region. gamma1/gamma2 carry the
/// safety margin: gamma1 = (1 − margin)·raw_min, gamma2 = (1 + margin)·raw_max.
struct HessianBand {
  double raw_min = 0.0;
  double raw_max = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  int samples = 0;
  bool positive() const { return raw_min > 0.0 && gamma1 < gamma2; }
  /// 1 − γ₁/γ₂.
  double ratio_gap() const { return 1.0 - gamma1 / gamma2; }
};

inline constexpr double kBandMargin = 0.1;

HessianBand hessian_band(const HessianEvaluator& hessian, const SamplingRegion& region,
                         double margin = kBandMargin);

/// [[F, aFFᵀ], [−(a+ε)I, −Fᵀ]].
Matrix q_matrix(const Matrix& f, double a, double eps);

/// 25 log-spaced values on [1e-4, 1].
std::vector<double> default_eps_grid();

struct EpsSweepPoint {
  double eps = 0.0;
  double margin = 0.0;  // min |Re λ(Q)| minus the imaginary-axis tolerance
};

struct QTestResult {
  bool passed = false;
  double best_eps = 0.0;
  double best_margin = 0.0;
  std::vector<EpsSweepPoint> sweep;
};

QTestResult q_matrix_test(const Matrix& f, double a,
                          const std::vector<double>& eps_grid = default_eps_grid());

struct ContractionCertificate {
  Matrix F_d;
  HessianBand band;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  bool hurwitz_ok = false;
  double hurwitz_margin = 0.0;
  bool band_ok = false;
  bool q_ok = false;
  double eps_found = 0.0;
  double Q_margin = 0.0;
  std::vector<EpsSweepPoint> eps_sweep;
  SamplingRegion region;
  std::optional<Matrix> omega;
  double sigma_estimate = 0.0;  // NaN when no Riccati solution was found
  bool certified() const { return hurwitz_ok && band_ok && q_ok; }
};

ContractionCertificate certify_constant_metric(const Matrix& f_d, const HessianEvaluator& hessian,
                                        const SamplingRegion& region,
                                        const std::vector<double>& eps_grid =
                                            default_eps_grid());

struct RegionTestResult {
  bool passed = false;
  double worst_margin = 0.0;  // min over the grid of −λmax(Ξ + Ξᵀ) − σ
  Vector worst_point;
  double worst_time = 0.0;
};

/// ωF∇²Hω⁻¹ + (ωF∇²Hω⁻¹)ᵀ ⪯ −σI at every grid point.
RegionTestResult contraction_region_test(const Matrix& f_d, const HessianEvaluator& hessian,
                                         const Matrix& omega_factor,
                                         const SamplingRegion& region, double sigma);

/// max over the region of λmax of the symmetric part of ωF∇²Hω⁻¹.
double xi_symmetric_max(const Matrix& f_d, const HessianEvaluator& hessian,
                        const Matrix& omega_factor, const SamplingRegion& region);

struct RateSweepRow {
  double d_d = 0.0;
  bool ph_ok = false;
  bool hurwitz_ok = false;
  bool riccati_ok = false;
  double gamma = 0.0;
  double eps = 0.0;
  double sigma = 0.0;       // NaN when the Riccati equation has no PD solution
  double xi_sym_max = 0.0;  // metric ω from the row's Ω, identity otherwise
};

struct SweepOptions {
  /// Riccati γ; the band value 1 − γ₁/γ₂ when unset.
  std::optional<double> gamma;
  /// Fixed ε; otherwise the ε of default_eps_grid() giving the largest σ.
  std::optional<double> eps;
};

/// One row per coupled-damping value; law_for builds the closed loop with
/// D_d = value·basis.
std::vector<RateSweepRow> coupled_damping_sweep(
    const std::function<ControllerLaw(double d_d)>& law_for,
    const std::vector<double>& d_values, const SamplingRegion& region,
    const SweepOptions& options = {});

}  // namespace emctl
