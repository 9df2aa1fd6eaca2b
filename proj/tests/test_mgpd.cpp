#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "tailattrib/errors.hpp"
#include "tailattrib/mgpd.hpp"
#include "tailattrib/numerics.hpp"
#include "test_util.hpp"

using namespace tailattrib;

namespace {

MgpdModel sym_model(double alpha, double sigma, double gamma, int d = 2) {
  MgpdModel m;
  m.alpha = Eigen::VectorXd::Constant(d, alpha);
  m.beta = Eigen::VectorXd::Zero(d);
  m.sigma = Eigen::VectorXd::Constant(d, sigma);
  m.gamma = gamma;
  return m;
}

}  // namespace

TEST_CASE("standardized density reduces to unit exponential at d=1") {
  Eigen::VectorXd a(1), b(1), z(1);
  a << 1.0;
  b << 0.0;
  for (double z0 : {0.1, 0.7, 2.5, 6.0}) {
    z << z0;
    CHECK(mgpd_log_density_std(z, a, b) == doctest::Approx(-z0).epsilon(1e-12));
  }
  z << -0.3;
  CHECK(mgpd_log_density_std(z, a, b) ==
        -std::numeric_limits<double>::infinity());
  z << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mgpd_log_density_std(z, a, b), InputError);
}

TEST_CASE("standardized density integrates to one at d=2") {
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 1.5;
  b << 0.0, 0.3;
  auto inner = [&](double z1) {
    return integrate_1d(
        [&](double z2) {
          Eigen::VectorXd z(2);
          z << z1, z2;
          double ll = mgpd_log_density_std(z, a, b);
          return std::isfinite(ll) ? std::exp(ll) : 0.0;
        },
        -30.0, 20.0, 1e-8);
  };
  double mass = integrate_1d(inner, -30.0, 20.0, 1e-6);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("simulation respects support and seeds") {
  MgpdModel m = sym_model(1.0, 1.0, 0.2);
  Eigen::MatrixXd z = mgpd_simulate(m, 20000, RngStream(3, 0));
  for (long i = 0; i < z.rows(); ++i) CHECK(z.row(i).maxCoeff() > 0.0);
  Eigen::MatrixXd z2 = mgpd_simulate(m, 20000, RngStream(3, 0));
  CHECK((z - z2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conditional margin follows the univariate GPD") {
  MgpdModel m = sym_model(1.3, 1.0, 0.2, 1);
  Eigen::MatrixXd z = mgpd_simulate(m, 100000, RngStream(17, 0));
  std::vector<double> pos;
  for (long i = 0; i < z.rows(); ++i)
    if (z(i, 0) > 0.0) pos.push_back(z(i, 0));
  double ks = ks_distance(
      pos, [&](double x) { return 1.0 - gpd_survival(x, {1.0, 0.2}); });
  CHECK(ks < 0.02);
}

TEST_CASE("projection law for random nonnegative weights") {
  RngStream wrng(99, 0);
  MgpdModel m = sym_model(2.0, 1.0, 0.15, 3);
  m.sigma << 1.0, 2.0, 0.5;
  Eigen::MatrixXd z = mgpd_simulate(m, 100000, RngStream(21, 0));
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd w(3);
    for (int j = 0; j < 3; ++j) w[j] = wrng.uniform();
    std::vector<double> proj;
    for (long i = 0; i < z.rows(); ++i) {
      double s = z.row(i).dot(w);
      if (s > 0.0) proj.push_back(s);
    }
    GpdParams p{w.dot(m.sigma), m.gamma};
    double ks =
        ks_distance(proj, [&](double x) { return 1.0 - gpd_survival(x, p); });
    CHECK(ks < ks_critical(proj.size(), 0.01));
  }
}

TEST_CASE("chi closed form") {
  // Symmetric case reduces to 2a/(2a+1).
  CHECK(mgpd_chi(1.0, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(mgpd_chi(3.0, 3.0) == doctest::Approx(6.0 / 7.0).epsilon(1e-12));
  RngStream rng(5, 0);
  for (int i = 0; i < 20; ++i) {
    double a = 1.0 + 4.0 * rng.uniform();
    double b = 1.0 + 4.0 * rng.uniform();
    CHECK(mgpd_chi(a, b) == doctest::Approx(mgpd_chi(b, a)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(mgpd_chi(-1.0, 2.0), std::domain_error);
}

TEST_CASE("chi closed form matches Monte Carlo at extreme levels") {
  MgpdModel m = sym_model(3.0, 1.0, 0.0);
  double closed = mgpd_chi(3.0, 3.0);
  CHECK(closed > 0.0);
  CHECK(closed < 1.0);
  ChiUEstimate mc = mgpd_chi_u(m, 0.9999, 20000000, RngStream(31, 0));
  CHECK(mc.value == doctest::Approx(closed).epsilon(0.01 / closed));

  // Asymmetric rates exercise the full closed form.
  MgpdModel ma = sym_model(3.0, 1.0, 0.0);
  ma.alpha << 3.0, 1.5;
  double closed_a = mgpd_chi(3.0, 1.5);
  ChiUEstimate mca = mgpd_chi_u(ma, 0.9999, 20000000, RngStream(32, 0));
  CHECK(mca.value == doctest::Approx(closed_a).epsilon(0.015 / closed_a));
}

TEST_CASE("chi(u) profile is flat for a symmetric model") {
  MgpdModel m = sym_model(2.0, 1.0, 0.1);
  double lo = 1e9, hi = -1e9;
  for (double u : {0.90, 0.93, 0.96, 0.99}) {
    ChiUEstimate e = mgpd_chi_u(m, u, 2000000, RngStream(7, 0));
    CHECK(e.value >= 0.0);
    lo = std::min(lo, e.value);
    hi = std::max(hi, e.value);
  }
  CHECK(hi - lo < 0.05);
}

TEST_CASE("fit recovers generating parameters") {
  MgpdModel truth = sym_model(1.0, 1.0, 0.1);
  Eigen::MatrixXd z = mgpd_simulate(truth, 10000, RngStream(42, 0));
  ExceedanceSet set{z, Eigen::VectorXd::Zero(2)};
  MgpdModel fit = mgpd_fit(set);
  CHECK(fit.gamma > 0.05);
  CHECK(fit.gamma < 0.15);
  // Symmetric generator: fitted rates should be close to each other.
  CHECK(std::fabs(fit.alpha[0] - fit.alpha[1]) <
        0.2 * (fit.alpha[0] + fit.alpha[1]));
}

TEST_CASE("degenerate input rejected") {
  Eigen::MatrixXd rows = Eigen::MatrixXd::Ones(100, 2);
  ExceedanceSet set{rows, Eigen::VectorXd::Zero(2)};
  CHECK_THROWS(mgpd_fit(set));
  CHECK_THROWS_AS(
      mgpd_fit(ExceedanceSet{Eigen::MatrixXd::Ones(10, 2),
                             Eigen::VectorXd::Zero(2)}),
      InputError);
}

TEST_CASE("tail probability estimator branches") {
  MgpdModel m = sym_model(1.0, 1.0, 0.1);
  Eigen::MatrixXd z = mgpd_simulate(m, 50000, RngStream(11, 0));
  Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.5);
  Eigen::VectorXd u(2);
  u << empirical_quantile(std::vector<double>(z.col(0).data(),
                                              z.col(0).data() + z.rows()),
                          0.9),
      empirical_quantile(std::vector<double>(z.col(1).data(),
                                             z.col(1).data() + z.rows()),
                         0.9);

  // Bulk branch agrees with the plain empirical frequency.
  std::vector<double> ws(z.rows());
  for (long i = 0; i < z.rows(); ++i) ws[static_cast<std::size_t>(i)] = z.row(i).dot(w);
  double med = empirical_quantile(ws, 0.5);
  long cnt = 0;
  for (double v : ws)
    if (v > med) ++cnt;
  CHECK(mgpd_tail_prob(m, z, w, u, med) ==
        doctest::Approx(static_cast<double>(cnt) / static_cast<double>(z.rows())));

  // Continuity across the branch point.
  double wu = w.dot(u);
  double below = mgpd_tail_prob(m, z, w, u, wu);
  double above = mgpd_tail_prob(m, z, w, u, wu + 1e-9);
  CHECK(std::fabs(below - above) < 2.0 / static_cast<double>(z.rows()) + 1e-6);

  // Monotone nonincreasing in v.
  double prev = 2.0;
  for (double v = med; v < wu + 5.0; v += 0.25) {
    double p = mgpd_tail_prob(m, z, w, u, v);
    CHECK(p <= prev + 1e-12);
    prev = p;
  }

  CHECK_THROWS_AS(mgpd_tail_prob(m, z, Eigen::VectorXd::Zero(2), u, 1.0),
                  InputError);
}

TEST_CASE("tail probability close to simulation truth") {
  MgpdModel m = sym_model(1.5, 1.0, 0.1);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.5);
  // Oracle: large-sample weighted-sum quantile and probability.
  Eigen::MatrixXd big = mgpd_simulate(m, 10000000, RngStream(77, 0));
  std::vector<double> ws(big.rows());
  for (long i = 0; i < big.rows(); ++i) ws[static_cast<std::size_t>(i)] = big.row(i).dot(w);
  double v = empirical_quantile(ws, 0.999);

  Eigen::MatrixXd data = mgpd_simulate(m, 100000, RngStream(78, 0));
  Eigen::VectorXd u(2);
  for (int j = 0; j < 2; ++j)
    u[j] = empirical_quantile(
        std::vector<double>(data.col(j).data(), data.col(j).data() + data.rows()),
        0.9);
  double est = mgpd_tail_prob(m, data, w, u, v);
  CHECK(est == doctest::Approx(0.001).epsilon(0.5));
}
