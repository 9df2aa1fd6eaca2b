#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tailattrib/attribution.hpp"
#include "tailattrib/rng.hpp"

namespace tailattrib {

struct BoundingBox {
  double lat_min = 0.0, lat_max = 0.0;
  double lon_min = 0.0, lon_max = 0.0;
};

// Regular centroid grid covering the box inclusively, anchored at the
// lower-left corner; rows are (lat, lon).
Eigen::MatrixXd build_grid(const BoundingBox& bbox, double spacing_deg);

// Great-circle distance in kilometers.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

struct HwHResult {
  double H = 0.0;
  bool gpd_fallback = false;  // kappa fit failed, simulated from a GPD
};

// Hosking-Wallis H1 heterogeneity statistic of per-site exceedance samples:
// observed between-site L-CV dispersion standardized against n_sim
// simulated homogeneous regions drawn from a fitted kappa distribution.
HwHResult hosking_wallis_H(const std::vector<std::vector<double>>& samples,
                           int n_sim, RngStream rng);

struct AdResult {
  double statistic = 0.0;  // A2_akN (midrank version)
  double p_proxy = 0.0;
};

// Scholz-Stephens k-sample Anderson-Darling test with midrank ties.
AdResult anderson_darling_k(const std::vector<std::vector<double>>& samples);

struct ClusterCriteria {
  double H_max = 2.0;
  double ad_alpha = 0.05;
  double threshold_q = 0.9;  // per-site exceedance level
  int n_sim = 200;           // homogeneous regions per H evaluation
};

struct ClusterAssignment {
  Eigen::Vector2d centroid;
  std::vector<int> member_sites;  // nearest first
  int d0 = 0;
  double hw_H = 0.0;
  double ad_p = 1.0;
  bool singleton = false;  // no cluster of size >= 2 passed
};

// Greedy nearest-first growth around the centroid; both worlds must pass
// H < H_max and AD p_proxy > ad_alpha, with early stop on first failure.
ClusterAssignment grow_cluster(const Eigen::Vector2d& centroid,
                               const Eigen::MatrixXd& site_coords,
                               const WorldSample& factual,
                               const WorldSample& counterfactual, int d0_max,
                               const ClusterCriteria& criteria, RngStream rng);

}  // namespace tailattrib
