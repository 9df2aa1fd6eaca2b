#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "tailattrib/errors.hpp"
#include "tailattrib/rng.hpp"
#include "tailattrib/univariate.hpp"

using namespace tailattrib;

namespace {

double gpd_draw(RngStream& rng, double sigma, double gamma) {
  double u = rng.uniform();
  if (std::fabs(gamma) < 1e-12) return -sigma * std::log(u);
  return sigma / gamma * (std::pow(u, -gamma) - 1.0);
}

}  // namespace

TEST_CASE("gpd_survival closed forms") {
  CHECK(gpd_survival(0.0, {2.0, 0.3}) == doctest::Approx(1.0));
  CHECK(gpd_survival(2.0, {2.0, 1.0}) == doctest::Approx(0.5));
  CHECK(gpd_survival(4.0, {2.0, -0.5}) == doctest::Approx(0.0));
  // Continuity at the gamma = 0 crossover.
  for (double z : {0.1, 1.0, 3.0, 7.0}) {
    double lo = gpd_survival(z, {1.5, -1e-8});
    double hi = gpd_survival(z, {1.5, 1e-8});
    CHECK(std::fabs(lo - hi) <= 1e-9);
  }
  // Nonincreasing in z.
  double prev = 2.0;
  for (double z = 0.0; z < 10.0; z += 0.1) {
    double v = gpd_survival(z, {1.0, 0.2});
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
}

TEST_CASE("gpd_fit_mle self-consistency") {
  RngStream rng(77, 0);
  std::vector<double> x(100000);
  for (double& v : x) v = gpd_draw(rng, 2.0, 0.2);
  GpdParams fit = gpd_fit_mle(x);
  CHECK(fit.sigma > 1.9);
  CHECK(fit.sigma < 2.1);
  CHECK(fit.gamma > 0.17);
  CHECK(fit.gamma < 0.23);

  for (double& v : x) v = rng.exponential();
  GpdParams fexp = gpd_fit_mle(x);
  CHECK(std::fabs(fexp.gamma) < 0.03);

  std::vector<double> cst(100, 1.0);
  CHECK_THROWS_AS(gpd_fit_mle(cst), InputError);
  CHECK_THROWS_AS(gpd_fit_mle(std::vector<double>(10, 1.0)), InputError);
}

TEST_CASE("fitted survival matches empirical survival") {
  RngStream rng(5, 0);
  std::vector<double> x(100000);
  for (double& v : x) v = gpd_draw(rng, 1.0, 0.3);
  GpdParams fit = gpd_fit_mle(x);
  std::sort(x.begin(), x.end());
  double ks = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); i += 97) {
    double emp = 1.0 - static_cast<double>(i + 1) / n;
    ks = std::max(ks, std::fabs(emp - gpd_survival(x[i], fit)));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("empirical_quantile type-7 convention") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1.0;
  CHECK(empirical_quantile(v, 0.90) == doctest::Approx(90.1));
  CHECK(empirical_quantile(v, 1e-9) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(empirical_quantile({42.0}, 0.3) == doctest::Approx(42.0));
  CHECK_THROWS_AS(empirical_quantile({}, 0.5), InputError);
}

TEST_CASE("return_level on exponential data") {
  RngStream rng(11, 0);
  std::vector<double> x(100000);
  for (double& v : x) v = rng.exponential();
  double rl = return_level(x, {5.0, 52.0}, 0.9);
  CHECK(rl == doctest::Approx(std::log(260.0)).epsilon(0.15 / std::log(260.0)));

  // zeta * N = 1 returns roughly the threshold itself.
  // With threshold at q=0.9, zeta = 0.1, so N = 10 -> years*bpy = 10.
  double u0 = empirical_quantile(x, 0.9);
  double rl0 = return_level(x, {10.0, 1.0}, 0.9);
  CHECK(rl0 == doctest::Approx(u0).epsilon(0.05));
}

TEST_CASE("return_level monotone in years for heavy tails") {
  RngStream rng(13, 0);
  std::vector<double> x(50000);
  for (double& v : x) v = gpd_draw(rng, 1.0, 0.3);
  double r5 = return_level(x, {5.0, 52.0});
  double r50 = return_level(x, {50.0, 52.0});
  CHECK(r50 > r5);
}
