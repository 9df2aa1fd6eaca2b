#include "tailattrib/univariate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailattrib/errors.hpp"
#include "tailattrib/optim.hpp"

namespace tailattrib {

double gpd_survival(double z, const GpdParams& params) {
  if (z < 0.0) return 1.0;
  if (std::fabs(params.gamma) <= 1e-8) return std::exp(-z / params.sigma);
  double base = 1.0 + params.gamma * z / params.sigma;
  if (base <= 0.0) return 0.0;
  return std::pow(base, -1.0 / params.gamma);
}

GpdParams gpd_fit_mle(const std::vector<double>& exceedances) {
  if (exceedances.size() < 30)
    throw InputError("gpd_fit_mle: need at least 30 exceedances");
  double mean = 0.0, var = 0.0, xmax = 0.0;
  for (double x : exceedances) {
    mean += x;
    xmax = std::max(xmax, x);
  }
  mean /= static_cast<double>(exceedances.size());
  for (double x : exceedances) var += (x - mean) * (x - mean);
  var /= static_cast<double>(exceedances.size());
  if (var <= 0.0) throw InputError("gpd_fit_mle: degenerate sample");

  auto nll = [&](const std::vector<double>& p) {
    double sigma = std::exp(p[0]);
    double gamma = p[1];
    double ll = 0.0;
    for (double x : exceedances) {
      if (std::fabs(gamma) < 1e-8) {
        ll += -std::log(sigma) - x / sigma;
      } else {
        double base = 1.0 + gamma * x / sigma;
        if (base <= 0.0) return 1e12;
        ll += -std::log(sigma) - (1.0 + 1.0 / gamma) * std::log(base);
      }
    }
    return -ll;
  };

  // Moment-based start.
  double cv2 = mean * mean / var;
  double g0 = std::clamp(0.5 * (1.0 - cv2), -0.4, 0.5);
  double s0 = std::max(0.5 * mean * (1.0 + cv2), 1e-12);
  OptimResult r = nelder_mead_box(nll, {std::log(s0), g0},
                                  {std::log(s0) - 12.0, -0.9},
                                  {std::log(s0) + 12.0, 1.0}, 1e-10, 4000);
  if (!r.converged)
    throw NumericalError("gpd_fit_mle: optimizer did not converge",
                         r.objective_value);
  return {std::exp(r.argmin[0]), r.argmin[1]};
}

double empirical_quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw InputError("empirical_quantile: empty sample");
  if (!(q > 0.0 && q < 1.0))
    throw InputError("empirical_quantile: q must be in (0,1)");
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  double h = (static_cast<double>(n) - 1.0) * q;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= n - 1) return sorted[n - 1];
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double empirical_quantile(const std::vector<double>& sample, double q) {
  std::vector<double> x(sample);
  std::sort(x.begin(), x.end());
  return empirical_quantile_sorted(x, q);
}

double return_level(const std::vector<double>& sample,
                    const ReturnLevelSpec& spec, double fit_threshold_q) {
  double u0 = empirical_quantile(sample, fit_threshold_q);
  std::vector<double> exc;
  for (double x : sample)
    if (x > u0) exc.push_back(x - u0);
  if (exc.size() < 30)
    throw InputError("return_level: fewer than 30 exceedances above threshold");
  GpdParams fit = gpd_fit_mle(exc);
  double zeta = static_cast<double>(exc.size()) /
                static_cast<double>(sample.size());
  double N = spec.years * spec.blocks_per_year;
  if (!(N * zeta > 0.0))
    throw InputError("return_level: exceedance probability outside (0,1)");
  if (std::fabs(fit.gamma) < 1e-8) return u0 + fit.sigma * std::log(zeta * N);
  return u0 + fit.sigma / fit.gamma * (std::pow(zeta * N, fit.gamma) - 1.0);
}

}  // namespace tailattrib
