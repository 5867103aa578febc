#include "emctl/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emctl/errors.hpp"

namespace emctl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix checked_hessian(const HessianEvaluator& hessian, const Vector& eta, double t) {
  Matrix h;
  try {
    h = hessian(eta, t);
  } catch (const DomainError& e) {
    throw NumericError(std::string("Hessian evaluation failed: ") + e.what());
  }
  if (h.rows() != h.cols() || h.rows() > eta.size()) {
    throw DimensionError("Hessian has wrong dimensions");
  }
  if (!h.allFinite()) throw NumericError("Hessian evaluation produced non-finite values");
  return 0.5 * (h + h.transpose());
}

template <typename Visit>
void for_each_sample(const SamplingRegion& region, Visit&& visit) {
  const auto points = region.grid();
  for (double t : region.times) {
    for (const auto& eta : points) visit(eta, t);
  }
}

}  // namespace

void SamplingRegion::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw ConfigurationError("sampling region is empty or has mismatched bounds");
  }
  if (!lower.allFinite() || !upper.allFinite()) {
    throw ConfigurationError("sampling region bounds must be finite");
  }
  for (int i = 0; i < lower.size(); ++i) {
    if (lower(i) > upper(i)) {
      throw ConfigurationError("sampling region is empty in coordinate " + std::to_string(i));
    }
  }
  if (points_per_dim < 1) throw ConfigurationError("points_per_dim must be positive");
  if (times.empty()) throw ConfigurationError("sampling region has no sample times");
}

std::vector<Vector> SamplingRegion::grid() const {
  validate();
  const int n = dimension();
  std::vector<int> counts(n);
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) {
    counts[i] = lower(i) == upper(i) ? 1 : points_per_dim;
    total *= static_cast<std::size_t>(counts[i]);
  }
  std::vector<Vector> out;
  out.reserve(total);
  std::vector<int> index(n, 0);
  for (std::size_t k = 0; k < total; ++k) {
    Vector eta(n);
    for (int i = 0; i < n; ++i) {
      eta(i) = counts[i] == 1 ? lower(i)
                              : lower(i) + (upper(i) - lower(i)) * index[i] / (counts[i] - 1);
    }
    out.push_back(std::move(eta));
    for (int i = 0; i < n; ++i) {
      if (++index[i] < counts[i]) break;
      index[i] = 0;
    }
  }
  return out;
}

bool SamplingRegion::contains(const Vector& eta) const {
  if (eta.size() != lower.size()) return false;
  return (eta.array() >= lower.array()).all() && (eta.array() <= upper.array()).all();
}

SamplingRegion region_around(const EMPlant& plant, const DesiredTarget& target,
                             double horizon, int points_per_dim, int time_samples) {
  if (!(horizon >= 0.0)) throw ConfigurationError("horizon must be non-negative");
  const int n = plant.state_size();
  const int probes = target.is_equilibrium() ? 1 : 2001;
  Vector lo = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (int k = 0; k < probes; ++k) {
    const double t = probes == 1 ? 0.0 : horizon * k / (probes - 1);
    const Vector s = target.state(t);
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  SamplingRegion region;
  region.points_per_dim = points_per_dim;
  region.lower.resize(n);
  region.upper.resize(n);
  for (int i = 0; i < n; ++i) {
    double span = hi(i) - lo(i);
    if (!(span > 0.0)) {
      span = std::max(std::abs(0.5 * (hi(i) + lo(i))), plant.state_scale(i));
    }
    region.lower(i) = lo(i) - 0.5 * span;
    region.upper(i) = hi(i) + 0.5 * span;
  }
  // Open q box: stay a small fraction of the span inside.
  for (int i = 0; i < plant.n_m; ++i) {
    const double inset = 1e-6 * (region.upper(i) - region.lower(i));
    if (std::isfinite(plant.q_lower(i))) {
      region.lower(i) = std::max(region.lower(i), plant.q_lower(i) + inset);
    }
    if (std::isfinite(plant.q_upper(i))) {
      region.upper(i) = std::min(region.upper(i), plant.q_upper(i) - inset);
    }
  }
  region.times.clear();
  if (target.is_equilibrium() || time_samples <= 1 || horizon == 0.0) {
    region.times.push_back(0.0);
  } else {
    for (int k = 0; k < time_samples; ++k) {
      region.times.push_back(horizon * k / (time_samples - 1));
    }
  }
  region.validate();
  return region;
}

HessianBand hessian_band(const HessianEvaluator& hessian, const SamplingRegion& region,
                         double margin) {
  region.validate();
  HessianBand band;
  band.raw_min = std::numeric_limits<double>::infinity();
  band.raw_max = -band.raw_min;
  for_each_sample(region, [&](const Vector& eta, double t) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(checked_hessian(hessian, eta, t),
                                                   Eigen::EigenvaluesOnly);
    band.raw_min = std::min(band.raw_min, es.eigenvalues().minCoeff());
    band.raw_max = std::max(band.raw_max, es.eigenvalues().maxCoeff());
    ++band.samples;
  });
  band.gamma1 = (1.0 - margin) * band.raw_min;
  band.gamma2 = (1.0 + margin) * band.raw_max;
  return band;
}

Matrix q_matrix(const Matrix& f, double a, double eps) {
  linalg::require_square(f, "F_d");
  const int n = static_cast<int>(f.rows());
  Matrix q(2 * n, 2 * n);
  q << f, a * f * f.transpose(), -(a + eps) * Matrix::Identity(n, n), -f.transpose();
  return q;
}

std::vector<double> default_eps_grid() {
  std::vector<double> grid;
  for (int k = 0; k < 25; ++k) grid.push_back(std::pow(10.0, -4.0 + 4.0 * k / 24.0));
  return grid;
}

QTestResult q_matrix_test(const Matrix& f, double a, const std::vector<double>& eps_grid) {
  if (eps_grid.empty()) throw ConfigurationError("empty eps grid");
  QTestResult result;
  result.best_margin = -std::numeric_limits<double>::infinity();
  for (double eps : eps_grid) {
    if (!(eps > 0.0)) throw ConfigurationError("eps values must be positive");
    const Matrix q = q_matrix(f, a, eps);
    const double margin = linalg::imaginary_axis_margin(q) -
                          linalg::default_imaginary_axis_tolerance(q);
    result.sweep.push_back({eps, margin});
    if (margin > result.best_margin) {
      result.best_margin = margin;
      result.best_eps = eps;
    }
  }
  // Re-verify the chosen ε on its own.
  if (result.best_margin > 0.0) {
    result.passed = !linalg::has_imaginary_axis_eigenvalue(q_matrix(f, a, result.best_eps));
  }
  return result;
}

ContractionCertificate certify_constant_metric(const Matrix& f_d, const HessianEvaluator& hessian,
                                        const SamplingRegion& region,
                                        const std::vector<double>& eps_grid) {
  linalg::require_square(f_d, "F_d");
  if (f_d.rows() != region.dimension()) {
    throw DimensionError("F_d and sampling region dimensions differ");
  }
  ContractionCertificate cert;
  cert.F_d = f_d;
  cert.region = region;
  cert.sigma_estimate = kNaN;

  const auto hw = linalg::is_hurwitz(f_d);
  cert.hurwitz_ok = hw.hurwitz;
  cert.hurwitz_margin = -hw.report.max_real_part;

  cert.band = hessian_band(hessian, region);
  cert.gamma1 = cert.band.gamma1;
  cert.gamma2 = cert.band.gamma2;
  cert.band_ok = cert.band.positive();

  if (cert.band_ok) {
    const double a = cert.band.ratio_gap();
    const auto q = q_matrix_test(f_d, a, eps_grid);
    cert.q_ok = q.passed;
    cert.eps_found = q.passed ? q.best_eps : 0.0;
    cert.Q_margin = q.best_margin;
    cert.eps_sweep = q.sweep;
    if (q.passed && cert.hurwitz_ok) {
      try {
        const auto sol = linalg::solve_riccati(f_d, a, q.best_eps);
        cert.omega = sol.omega;
        cert.sigma_estimate = linalg::convergence_rate_sigma(sol.omega, cert.gamma2, q.best_eps);
      } catch (const Error&) {
        cert.sigma_estimate = kNaN;
      }
    }
  }
  return cert;
}

RegionTestResult contraction_region_test(const Matrix& f_d, const HessianEvaluator& hessian,
                                         const Matrix& omega_factor,
                                         const SamplingRegion& region, double sigma) {
  linalg::require_square(omega_factor, "omega");
  if (omega_factor.rows() != f_d.rows()) throw DimensionError("omega and F_d differ in size");
  const Eigen::FullPivLU<Matrix> lu(omega_factor);
  if (!lu.isInvertible()) throw NumericError("metric factor omega is singular");
  const Matrix omega_inv = lu.inverse();
  RegionTestResult result;
  result.worst_margin = std::numeric_limits<double>::infinity();
  for_each_sample(region, [&](const Vector& eta, double t) {
    const Matrix xi = omega_factor * f_d * checked_hessian(hessian, eta, t) * omega_inv;
    const double margin = -linalg::max_symmetric_eigenvalue(xi + xi.transpose()) - sigma;
    if (margin < result.worst_margin) {
      result.worst_margin = margin;
      result.worst_point = eta;
      result.worst_time = t;
    }
  });
  result.passed = result.worst_margin >= -1e-12 * (1.0 + std::abs(sigma));
  return result;
}

double xi_symmetric_max(const Matrix& f_d, const HessianEvaluator& hessian,
                        const Matrix& omega_factor, const SamplingRegion& region) {
  const Matrix omega_inv = omega_factor.fullPivLu().inverse();
  double worst = -std::numeric_limits<double>::infinity();
  for_each_sample(region, [&](const Vector& eta, double t) {
    const Matrix xi = omega_factor * f_d * checked_hessian(hessian, eta, t) * omega_inv;
    worst = std::max(worst, linalg::max_symmetric_eigenvalue(0.5 * (xi + xi.transpose())));
  });
  return worst;
}

std::vector<RateSweepRow> coupled_damping_sweep(
    const std::function<ControllerLaw(double d_d)>& law_for,
    const std::vector<double>& d_values, const SamplingRegion& region,
    const SweepOptions& options) {
  if (d_values.empty()) throw ConfigurationError("coupled-damping grid is empty");
  std::vector<double> sorted = d_values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<RateSweepRow> rows;
  for (double d : sorted) {
    const ControllerLaw law = law_for(d);
    const HessianEvaluator hess = [&law](const Vector& eta, double t) {
      return law.desired_hessian(eta, t);
    };
    RateSweepRow row;
    row.d_d = d;
    row.sigma = kNaN;
    const Matrix f = law.closed_loop_structure();
    const auto& shape = law.shape();
    try {
      row.ph_ok = linalg::ph_structure_condition(law.plant().R_m, shape.D_d, shape.Rbar_e,
                                                 false);
    } catch (const DefinitenessError&) {
      row.ph_ok = false;
    }
    row.hurwitz_ok = linalg::is_hurwitz(f).hurwitz;
    const HessianBand band = hessian_band(hess, region);
    row.gamma = options.gamma ? *options.gamma : band.ratio_gap();
    Matrix omega_factor = Matrix::Identity(f.rows(), f.cols());
    if (row.hurwitz_ok && band.positive() && row.gamma >= 0.0 && row.gamma < 1.0) {
      const std::vector<double> eps_values =
          options.eps ? std::vector<double>{*options.eps} : default_eps_grid();
      for (double eps : eps_values) {
        try {
          const auto sol = linalg::solve_riccati(f, row.gamma, eps);
          const double sigma = linalg::convergence_rate_sigma(sol.omega, band.gamma2, eps);
          if (!row.riccati_ok || sigma > row.sigma) {
            row.riccati_ok = true;
            row.sigma = sigma;
            row.eps = eps;
            omega_factor = linalg::metric_factor(sol.omega);
          }
        } catch (const Error&) {
        }
      }
    }
    row.xi_sym_max = xi_symmetric_max(f, hess, omega_factor, region);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace emctl
