#pragma once

#include <Eigen/Dense>

#include "tailattrib/rng.hpp"

namespace tailattrib {

// Exponential factor copula model: W(s) = Z(s) + V with Z a centered Gaussian
// process with exponential correlogram exp(-h/range_delta) and V ~ Exp(lambda)
// a common factor shared by all sites.
struct EfcmModel {
  double lambda = 1.0;       // rate of the common exponential factor
  double range_delta = 1.0;  // correlogram range
  Eigen::MatrixXd coords;    // d x 2 site coordinates
  Eigen::MatrixXd corr;      // d x d, exp(-h_ij / range_delta)
  bool lambda_at_bound = false;  // fit hit the lambda search bound
  bool converged = true;
  double neg_log_lik = 0.0;
};

// Builds the model with corr derived from pairwise coordinate distances.
EfcmModel make_efcm_model(double lambda, double range_delta,
                          const Eigen::MatrixXd& coords);

// n x d rows of Z + V 1.
Eigen::MatrixXd efcm_simulate(const EfcmModel& model, int n, RngStream rng);

// Marginal CDF/density/quantile of W_j = Z_j + V, Z_j standard normal.
double efcm_marginal_cdf(double w, double lambda);
double efcm_marginal_pdf(double w, double lambda);
double efcm_marginal_quantile(double u, double lambda);

// Bivariate pieces for a pair with Gaussian correlation rho.
// Diagonal joint CDF P(W1 <= w, W2 <= w).
double efcm_joint_cdf(double w, double lambda, double rho);
// Joint density at (x1, x2) and its log.
double efcm_pair_density(double x1, double x2, double lambda, double rho);
double efcm_log_pair_density(double x1, double x2, double lambda, double rho);
// Partial derivative d/dx1 P(W1 <= x1, W2 <= x2) and its log.
double efcm_partial1(double x1, double x2, double lambda, double rho);
double efcm_log_partial1(double x1, double x2, double lambda, double rho);

// Limiting and finite-level tail dependence for a pair.
double efcm_chi(double lambda, double rho12);
double efcm_chi_u(double lambda, double rho12, double u);

// Pairwise censored pseudo-likelihood fit on rank-transformed margins.
EfcmModel efcm_fit(const Eigen::MatrixXd& data, const Eigen::MatrixXd& coords,
                   double censor_q, RngStream rng);

}  // namespace tailattrib
