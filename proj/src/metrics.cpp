#include "emctl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "emctl/errors.hpp"

namespace emctl {

ExponentialFit exponential_fit(const std::vector<double>& t, const std::vector<double>& y,
                               double t0, double t1, double floor) {
  if (t.size() != y.size()) throw DimensionError("fit inputs differ in length");
  std::vector<double> xs, ls;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t0 || t[k] > t1 || !(y[k] > floor) || !(y[k] > 0.0)) continue;
    xs.push_back(t[k]);
    ls.push_back(std::log(y[k]));
  }
  ExponentialFit fit;
  fit.points = static_cast<int>(xs.size());
  if (fit.points < 3) return fit;
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ls[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ls[k] - my);
    syy += (ls[k] - my) * (ls[k] - my);
  }
  if (sxx <= 0.0) return fit;
  const double slope = sxy / sxx;
  fit.rate = -slope;
  fit.intercept = my - slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

std::vector<double> running_l2(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) throw DimensionError("running_l2 inputs differ in length");
  std::vector<double> out(t.size(), 0.0);
  double acc = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) {
    acc += 0.5 * (t[k] - t[k - 1]) * (y[k] * y[k] + y[k - 1] * y[k - 1]);
    out[k] = std::sqrt(acc);
  }
  return out;
}

int count_zero_crossings(const std::vector<double>& e, double band) {
  int crossings = 0;
  int side = 0;
  for (double v : e) {
    const int s = v > band ? 1 : (v < -band ? -1 : 0);
    if (s == 0) continue;
    if (side != 0 && s != side) ++crossings;
    side = s;
  }
  return crossings;
}

Metrics compute_metrics(const SimRecord& record, const MetricsOptions& options) {
  if (record.size() == 0) throw ConfigurationError("empty simulation record");
  if (!record.has_reference()) throw ConfigurationError("record has no reference errors");
  Metrics m;
  const auto& t = record.times;
  const auto& en = record.error_norms;
  m.final_error = en.back();
  m.running_l2 = running_l2(t, en);

  for (int i = 0; i < record.n_m; ++i) {
    std::vector<double> eq;
    double peak = 0.0;
    for (const auto& e : record.errors) {
      eq.push_back(e(i));
      peak = std::max(peak, std::abs(e(i)));
    }
    const double e0 = eq.front();
    const double band = options.hysteresis * (e0 != 0.0 ? std::abs(e0) : peak);
    m.zero_crossings += count_zero_crossings(eq, band);
    // Largest excursion to the far side of the target.
    const double sign = e0 > 0.0 ? 1.0 : (e0 < 0.0 ? -1.0 : 0.0);
    for (double v : eq) {
      const double past = sign == 0.0 ? std::abs(v) : -sign * v;
      m.peak_overshoot = std::max(m.peak_overshoot, past);
    }
  }

  const double horizon = t.back();
  const double t0 = options.fit_start_fraction * horizon;
  const auto fit = exponential_fit(t, en, t0, horizon, options.noise_floor);
  m.fitted_rate = fit.rate;
  m.fit_r2 = fit.r2;
  m.fit_points = fit.points;
  m.fit_r2_window = exponential_fit(t, en, t0, horizon, 0.0).r2;
  return m;
}

double default_noise_floor(const DesiredTarget& target, double horizon, double rel_tol) {
  double peak = 0.0;
  const int probes = target.is_equilibrium() ? 1 : 2001;
  for (int k = 0; k < probes; ++k) {
    const double t = probes == 1 ? 0.0 : horizon * k / (probes - 1);
    peak = std::max(peak, target.state(t).norm());
  }
  return 100.0 * rel_tol * peak;
}

}  // namespace emctl
