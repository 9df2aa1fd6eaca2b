#pragma once

#include <vector>

namespace tailattrib {

struct GpdParams {
  double sigma = 1.0;  // scale, > 0
  double gamma = 0.0;  // shape
};

struct ReturnLevelSpec {
  double years = 5.0;
  double blocks_per_year = 52.0;  // 7-day maxima convention
};

// Survival (1 + gamma z / sigma)_+^{-1/gamma} for z >= 0; exponential limit
// when |gamma| is tiny.
double gpd_survival(double z, const GpdParams& params);

// ML fit to positive exceedances; gamma constrained to (-0.9, 1.0).
GpdParams gpd_fit_mle(const std::vector<double>& exceedances);

// Type-7 order-statistic quantile (linear interpolation).
double empirical_quantile(const std::vector<double>& sample, double q);
double empirical_quantile_sorted(const std::vector<double>& sorted, double q);

// GPD-above-threshold return level: threshold at the fit_threshold_q
// empirical quantile, N = years * blocks_per_year.
double return_level(const std::vector<double>& sample,
                    const ReturnLevelSpec& spec, double fit_threshold_q = 0.9);

}  // namespace tailattrib
