#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "tailattrib/dependence.hpp"
#include "tailattrib/efcm.hpp"
#include "tailattrib/errors.hpp"

using namespace tailattrib;

TEST_CASE("empirical chi(u) on stylized pairs") {
  RngStream rng(7, 0);
  int n = 100000;
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    y[i] = rng.uniform();
  }

  for (double u : {0.5, 0.7, 0.9, 0.99})
    CHECK(empirical_chi_u(x, x, u).value == doctest::Approx(1.0));

  CHECK(empirical_chi_u(x, y, 0.9).value ==
        doctest::Approx(0.1).epsilon(0.1));
  CHECK(std::fabs(empirical_chi_u(x, y, 0.9).value - 0.1) < 0.01);

  std::vector<double> neg(n);
  for (int i = 0; i < n; ++i) neg[i] = -x[i];
  CHECK(empirical_chi_u(x, neg, 0.9).value == 0.0);
}

TEST_CASE("rank invariance under monotone transforms") {
  RngStream rng(8, 0);
  int n = 500;
  std::vector<double> x(n), y(n), tx(n), ty(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.gauss();
    y[i] = 0.5 * x[i] + rng.gauss();
    tx[i] = std::exp(x[i]);
    ty[i] = y[i] * y[i] * y[i] + 2.0;
  }
  for (double u : {0.5, 0.8, 0.9}) {
    CHECK(empirical_chi_u(tx, ty, u).value ==
          empirical_chi_u(x, y, u).value);
  }
}

TEST_CASE("undefined marker and input validation") {
  std::vector<double> x(200), flat(200, 1.0);
  for (int i = 0; i < 200; ++i) x[i] = i;
  // All-tied conditioning variable: every average rank sits at the center,
  // so nothing exceeds the cutoff.
  EmpiricalChiU e = empirical_chi_u(x, flat, 0.9);
  CHECK_FALSE(e.defined);

  std::vector<double> small(50, 0.0);
  CHECK_THROWS_AS(empirical_chi_u(small, small, 0.9), InputError);
  std::vector<double> y(199, 0.0);
  CHECK_THROWS_AS(empirical_chi_u(x, y, 0.9), InputError);
  CHECK_THROWS_AS(empirical_chi_u(x, x, 0.4), InputError);
  CHECK_THROWS_AS(empirical_chi_u(x, x, 1.0), InputError);
  CHECK_THROWS_AS(empirical_chi_u(x, x, 0.99), InputError);  // (1-u)n < 5
}

TEST_CASE("default grid and curve assembly") {
  std::vector<double> g = default_u_grid();
  CHECK(g.size() == 40);
  CHECK(g.front() == doctest::Approx(0.5));
  CHECK(g.back() == doctest::Approx(0.995));
  CHECK(std::is_sorted(g.begin(), g.end()));

  RngStream rng(9, 0);
  int n = 2000;
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.gauss();
    y[i] = x[i] + 0.3 * rng.gauss();
  }
  std::vector<double> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(0.5 + 0.02 * i);

  ChiCurve none = empirical_chi_curve(x, y, grid, 0, 0.95, RngStream(10, 0));
  CHECK(none.lower.empty());
  CHECK(none.upper.empty());
  CHECK(none.values.size() == grid.size());
  for (double v : none.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  std::vector<double> bad = grid;
  std::swap(bad[3], bad[7]);
  CHECK_THROWS_AS(empirical_chi_curve(x, y, bad, 0, 0.95, RngStream(10, 0)),
                  InputError);

  ChiCurve model = model_chi_curve([](double u) { return 1.0 - u; }, grid,
                                   "truth");
  CHECK(model.source == "truth");
  CHECK(model.values[0] == doctest::Approx(0.5));
}

TEST_CASE("bootstrap bands cover the true model curve") {
  Eigen::MatrixXd coords(2, 2);
  coords << 0.0, 0.0, 0.8 * std::log(2.0), 0.0;  // rho = 0.5
  EfcmModel truth = make_efcm_model(2.0, 0.8, coords);
  Eigen::MatrixXd sim = efcm_simulate(truth, 4000, RngStream(11, 0));
  std::vector<double> x(sim.col(0).data(), sim.col(0).data() + sim.rows());
  std::vector<double> y(sim.col(1).data(), sim.col(1).data() + sim.rows());

  std::vector<double> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(0.5 + 0.0235 * i);
  ChiCurve curve =
      empirical_chi_curve(x, y, grid, 300, 0.95, RngStream(12, 0));
  REQUIRE(curve.lower.size() == grid.size());
  int covered = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double truth_chi = efcm_chi_u(2.0, 0.5, grid[k]);
    CHECK(curve.lower[k] <= curve.upper[k]);
    if (curve.lower[k] - 0.02 <= truth_chi &&
        truth_chi <= curve.upper[k] + 0.02)
      ++covered;
  }
  CHECK(covered >= 18);
}
