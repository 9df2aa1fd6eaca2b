#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "tailattrib/rng.hpp"

namespace tailattrib {

// Pointwise chi(u) curve with optional bootstrap confidence bands.
struct ChiCurve {
  std::vector<double> u_grid;
  std::vector<double> values;
  std::vector<double> lower, upper;  // empty when no band was requested
  std::string source;                // empirical | mgpd | efcm | hw | truth
};

struct EmpiricalChiU {
  double value = 0.0;
  bool defined = true;  // false when the conditioning set is empty
};

// Rank-based chi(u): #{rank_x > un and rank_y > un} / #{rank_y > un},
// with average ranks for ties.
EmpiricalChiU empirical_chi_u(const std::vector<double>& x,
                              const std::vector<double>& y, double u);

// 40 equally spaced levels on [0.5, 0.995].
std::vector<double> default_u_grid();

// Empirical curve over u_grid; bootstrap_B = 0 skips the bands, otherwise
// pointwise percentile bands at the given level from iid pair resamples.
ChiCurve empirical_chi_curve(const std::vector<double>& x,
                             const std::vector<double>& y,
                             const std::vector<double>& u_grid,
                             int bootstrap_B, double level, RngStream rng);

// Model curve from a chi(u) function (one of the model chi_u operations).
ChiCurve model_chi_curve(const std::function<double(double)>& chi_u,
                         const std::vector<double>& u_grid,
                         const std::string& source);

}  // namespace tailattrib
