#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tailattrib/rng.hpp"
#include "tailattrib/univariate.hpp"

namespace tailattrib {

// Multivariate generalized Pareto model with independent reverse-exponential
// generator components. alpha/beta parameterize the generator, sigma/gamma
// the marginal transform; gamma is shared across sites.
struct MgpdModel {
  Eigen::VectorXd alpha;  // generator rates, > 0
  Eigen::VectorXd beta;   // generator shifts, beta[0] pinned to 0
  Eigen::VectorXd sigma;  // marginal scales, > 0
  double gamma = 0.0;     // common shape
  bool converged = true;
  double neg_log_lik = 0.0;
};

// Rows exceeding their threshold in at least one component.
struct ExceedanceSet {
  Eigen::MatrixXd rows;        // n x d raw values
  Eigen::VectorXd threshold_u; // d
};

// Builds the exceedance set over per-column thresholds; keeps rows with
// max_j (x_j - u_j) > 0.
ExceedanceSet make_exceedance_set(const Eigen::MatrixXd& data,
                                  const Eigen::VectorXd& threshold_u);

// Log density of the standardized vector Z*; -inf when max(z) <= 0.
double mgpd_log_density_std(const Eigen::VectorXd& z,
                            const Eigen::VectorXd& alpha,
                            const Eigen::VectorXd& beta);

// Uncensored ML fit of (alpha, beta, sigma, gamma) to x - u.
MgpdModel mgpd_fit(const ExceedanceSet& data);

// Simulates Z on the sigma/gamma scale (n x d).
Eigen::MatrixXd mgpd_simulate(const MgpdModel& model, int n, RngStream rng);

// Limiting bivariate tail dependence coefficient (closed form).
double mgpd_chi(double alpha1, double alpha2);

struct ChiUEstimate {
  double value = 0.0;
  bool low_count_warning = false;  // fewer than 20 joint exceedances
};

// Monte Carlo chi(u) of components (0,1) of the model, empirical margins.
ChiUEstimate mgpd_chi_u(const MgpdModel& model, double u, long n_mc,
                        RngStream rng);

// Tail probability estimator for P(w.X > v): empirical in the bulk,
// empirical prefactor times the projected GPD survival in the tail.
double mgpd_tail_prob(const MgpdModel& model, const Eigen::MatrixXd& data,
                      const Eigen::VectorXd& w, const Eigen::VectorXd& u,
                      double v);

}  // namespace tailattrib
