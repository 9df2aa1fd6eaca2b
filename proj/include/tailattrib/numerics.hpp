#pragma once

#include <Eigen/Dense>
#include <functional>
#include <tuple>
#include <vector>

#include "tailattrib/rng.hpp"

namespace tailattrib {

// Standard normal CDF, abs error below 1e-15.
double std_normal_cdf(double x);
double std_normal_pdf(double x);

// Inverse of std_normal_cdf on (0,1).
double std_normal_quantile(double p);

// P(X <= x, Y <= y) for standard bivariate normal with correlation rho,
// |rho| < 1. Drezner/Genz fixed-order Gauss-Legendre scheme.
double bivariate_normal_cdf(double x, double y, double rho);

// Adaptive quadrature of f on [a,b]. Throws NumericalError (carrying the
// best estimate) if the subdivision budget is exhausted.
double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    double rel_tol = 1e-10);

// One-sided positive alpha-stable draw with Laplace transform E e^{-sS} =
// exp(-s^alpha), alpha in (0,1]; degenerate at 1 for alpha = 1.
double sample_positive_stable(double alpha, RngStream& rng);

struct LMoments {
  double l1, l2, t, t3, t4;
};

// Unbiased sample L-moments and ratios; requires at least 4 points.
LMoments l_moments(const std::vector<double>& sample);

// Column-wise pseudo-uniforms by average rank: rank / (n + 1).
Eigen::MatrixXd pseudo_uniforms(const Eigen::MatrixXd& data);

// Gauss-Legendre nodes and weights on [0, 1].
struct GaussLegendre {
  std::vector<double> nodes, weights;
};
const GaussLegendre& gauss_legendre(int n);

// Bracketed root of f on [lo, hi] (f(lo), f(hi) of opposite sign).
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol = 1e-12);

}  // namespace tailattrib
