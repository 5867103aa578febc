#pragma once

#include <vector>

#include "emctl/simulator.hpp"

namespace emctl {

struct ExponentialFit {
  double rate = 0.0;  // −slope of log y against t
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
};

/// Least squares of log y on t over samples with t ∈ [t0, t1] and y > floor.
/// Fewer than three usable samples give points < 3 and rate 0.
ExponentialFit exponential_fit(const std::vector<double>& t, const std::vector<double>& y,
                               double t0, double t1, double floor = 0.0);

/// √(∫₀ᵗ y² dτ) by the trapezoid rule, one value per sample.
std::vector<double> running_l2(const std::vector<double>& t, const std::vector<double>& y);

/// Sign changes of e that cross the band [−band, band] completely.
int count_zero_crossings(const std::vector<double>& e, double band);

struct MetricsOptions {
  double fit_start_fraction = 0.05;
  /// Samples of ‖e‖ at or below this are excluded from the rate fit.
  double noise_floor = 0.0;
  /// Hysteresis band relative to the initial position error.
  double hysteresis = 1e-3;
};

struct Metrics {
  double final_error = 0.0;
  int zero_crossings = 0;
  double peak_overshoot = 0.0;
  std::vector<double> running_l2;
  double fitted_rate = 0.0;
  double fit_r2 = 0.0;
  int fit_points = 0;
  /// R² over every sample of the window, ignoring the noise floor.
  double fit_r2_window = 0.0;
};

/// Requires a record with reference errors; throws ConfigurationError on an
/// empty record.
Metrics compute_metrics(const SimRecord& record, const MetricsOptions& options = {});

/// Noise floor used for rate fits: 100·rel_tol·max_t ‖η⋆(t)‖.
double default_noise_floor(const DesiredTarget& target, double horizon, double rel_tol);

}  // namespace emctl
