#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "tailattrib/errors.hpp"
#include "tailattrib/numerics.hpp"
#include "tailattrib/rng.hpp"

using namespace tailattrib;

namespace {

// Independent erf oracle: Taylor series for |x| <= 2, continued fraction
// style complement via asymptotic-safe integration elsewhere.
double erf_series(double x) {
  double term = x, sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    sum += term / (2 * n + 1);
  }
  return sum * 2.0 / std::sqrt(3.14159265358979323846);
}

}  // namespace

TEST_CASE("std_normal_cdf basic values") {
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std_normal_cdf(40.0) == doctest::Approx(1.0).epsilon(1e-15));
  double phi1 = 0.5 * (1.0 + erf_series(1.0 / std::sqrt(2.0)));
  CHECK(std_normal_cdf(1.0) == doctest::Approx(phi1).epsilon(1e-12));
  CHECK(std_normal_cdf(1.0) == doctest::Approx(0.8413447461).epsilon(1e-9));
}

TEST_CASE("std_normal_cdf symmetry property") {
  for (double x = -8.0; x <= 8.0; x += 0.173) {
    CHECK(std::fabs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) <= 1e-12);
  }
}

TEST_CASE("std_normal_quantile inverts the cdf") {
  for (double p : {1e-10, 1e-4, 0.01, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-6}) {
    CHECK(std_normal_cdf(std_normal_quantile(p)) ==
          doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("bivariate_normal_cdf oracle values") {
  CHECK(bivariate_normal_cdf(0.0, 0.0, 0.0) == doctest::Approx(0.25).epsilon(1e-10));
  // Sheppard's arcsine identity at the origin.
  for (double rho : {-0.9, -0.5, -0.1, 0.3, 0.5, 0.8, 0.95}) {
    double expected = 0.25 + std::asin(rho) / (2.0 * 3.14159265358979323846);
    CHECK(bivariate_normal_cdf(0.0, 0.0, rho) ==
          doctest::Approx(expected).epsilon(1e-9));
  }
  // Marginalization.
  for (double x : {-1.3, 0.4, 2.1}) {
    CHECK(bivariate_normal_cdf(x, 50.0, 0.6) ==
          doctest::Approx(std_normal_cdf(x)).epsilon(1e-9));
  }
  // Independence factorization.
  CHECK(bivariate_normal_cdf(0.7, -1.1, 0.0) ==
        doctest::Approx(std_normal_cdf(0.7) * std_normal_cdf(-1.1)).epsilon(1e-9));
  CHECK_THROWS_AS(bivariate_normal_cdf(0.0, 0.0, 1.5), std::domain_error);
}

TEST_CASE("bivariate_normal_cdf against direct quadrature") {
  // P(X<=x, Y<=y) = int_{-inf}^{x} phi(s) Phi((y - rho s)/sqrt(1-rho^2)) ds
  auto oracle = [](double x, double y, double rho) {
    double s = std::sqrt(1.0 - rho * rho);
    return integrate_1d(
        [&](double t) {
          return std_normal_pdf(t) * std_normal_cdf((y - rho * t) / s);
        },
        -9.0, x, 1e-10);
  };
  std::vector<double> xs = {-1.5, -0.3, 0.6, 2.2};
  std::vector<double> rhos = {-0.95, -0.4, 0.2, 0.7, 0.93, 0.995};
  for (double rho : rhos)
    for (double x : xs)
      for (double y : xs)
        CHECK(bivariate_normal_cdf(x, y, rho) ==
              doctest::Approx(oracle(x, y, rho)).epsilon(5e-8));
}

TEST_CASE("bivariate_normal_cdf monotone in each argument and rho") {
  double prev;
  for (double rho : {-0.8, 0.0, 0.8}) {
    prev = -1.0;
    for (double x = -3.0; x <= 3.0; x += 0.25) {
      double v = bivariate_normal_cdf(x, 0.4, rho);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
  }
  prev = -1.0;
  for (double rho = -0.95; rho <= 0.95; rho += 0.05) {
    double v = bivariate_normal_cdf(0.3, -0.2, rho);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("integrate_1d closed forms") {
  CHECK(integrate_1d([](double) { return 1.0; }, 0.0, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(integrate_1d([](double r) { return std::exp(-r); }, 0.0, 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
  CHECK(integrate_1d([](double r) { return std::sin(r); }, 0.0, 3.0, 1e-12) ==
        doctest::Approx(1.0 - std::cos(3.0)).epsilon(1e-10));
}

TEST_CASE("positive stable draws") {
  RngStream rng(42, 0);
  CHECK(sample_positive_stable(1.0, rng) == 1.0);
  CHECK_THROWS_AS(sample_positive_stable(1.2, rng), std::domain_error);
  CHECK_THROWS_AS(sample_positive_stable(0.0, rng), std::domain_error);

  // Laplace transform identity E exp(-S) = exp(-1) at alpha = 0.5.
  const int n = 1000000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(-sample_positive_stable(0.5, rng));
  CHECK(acc / n == doctest::Approx(std::exp(-1.0)).epsilon(0.01));

  // And at alpha = 0.7, s = 2: E exp(-2S) = exp(-2^0.7).
  double acc2 = 0.0;
  for (int i = 0; i < n; ++i)
    acc2 += std::exp(-2.0 * sample_positive_stable(0.7, rng));
  CHECK(acc2 / n ==
        doctest::Approx(std::exp(-std::pow(2.0, 0.7))).epsilon(0.01));
}

TEST_CASE("positive stable determinism across equal seeds") {
  RngStream a(7, 3), b(7, 3);
  for (int i = 0; i < 10; ++i)
    CHECK(sample_positive_stable(0.7, a) == sample_positive_stable(0.7, b));
}

TEST_CASE("rng substreams differ and replay") {
  RngStream a(1, 0);
  RngStream b = a.substream(1), c = a.substream(2), b2 = a.substream(1);
  CHECK(b.next_u64() != c.next_u64());
  RngStream b3 = a.substream(1);
  CHECK(b2.next_u64() == b3.next_u64());
}

TEST_CASE("l_moments basics") {
  LMoments lm = l_moments({1, 2, 3, 4, 5});
  CHECK(lm.l1 == doctest::Approx(3.0));
  LMoments cst = l_moments({2, 2, 2, 2, 2, 2});
  CHECK(cst.l2 == doctest::Approx(0.0).epsilon(1e-14));
  CHECK_THROWS_AS(l_moments({1, 2, 3}), InputError);

  // Uniform(0,1): population L-CV is 1/3.
  RngStream rng(9, 0);
  std::vector<double> u(200000);
  for (double& x : u) x = rng.uniform();
  LMoments lu = l_moments(u);
  CHECK(lu.t == doctest::Approx(1.0 / 3.0).epsilon(0.01));
  CHECK(lu.t3 == doctest::Approx(0.0).epsilon(0.01));
}

TEST_CASE("find_root solves monotone equations") {
  double r = find_root([](double x) { return x * x - 2.0; }, 0.0, 2.0);
  CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("gauss_legendre nodes integrate exactly") {
  // An n-point rule on [0,1] is exact for polynomials up to degree 2n-1.
  for (int n : {5, 24}) {
    const GaussLegendre& gl = gauss_legendre(n);
    REQUIRE(static_cast<int>(gl.nodes.size()) == n);
    double w = 0.0;
    for (double wi : gl.weights) w += wi;
    CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
    int deg = 2 * n - 1;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += gl.weights[i] * std::pow(gl.nodes[i], deg);
    CHECK(s == doctest::Approx(1.0 / (deg + 1.0)).epsilon(1e-12));
  }
  // Smooth non-polynomial integrand.
  const GaussLegendre& g = gauss_legendre(24);
  double s = 0.0;
  for (int i = 0; i < 24; ++i) s += g.weights[i] * std::exp(g.nodes[i]);
  CHECK(s == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-13));
  CHECK(&gauss_legendre(24) == &g);  // cached
}
