#include "tailattrib/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tailattrib/attribution.hpp"
#include "tailattrib/errors.hpp"
#include "tailattrib/parallel.hpp"
#include "tailattrib/univariate.hpp"

namespace tailattrib {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// 1-based average ranks (ties share the mean rank of their run).
std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    double mean = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mean;
    i = j + 1;
  }
  return rank;
}

EmpiricalChiU chi_from_ranks(const std::vector<double>& rx,
                             const std::vector<double>& ry, double u) {
  const double cut = u * static_cast<double>(rx.size());
  long joint = 0, cond = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    if (ry[i] > cut) {
      ++cond;
      if (rx[i] > cut) ++joint;
    }
  }
  if (cond == 0) return {kNan, false};
  return {static_cast<double>(joint) / static_cast<double>(cond), true};
}

void check_inputs(std::size_t n, std::size_t m, double u) {
  if (n != m) throw InputError("empirical_chi_u: length mismatch");
  if (n < 100) throw InputError("empirical_chi_u: need n >= 100");
  if (!(u >= 0.5 && u < 1.0))
    throw InputError("empirical_chi_u: u must lie in [0.5, 1)");
  if ((1.0 - u) * static_cast<double>(n) < 5.0)
    throw InputError("empirical_chi_u: fewer than 5 expected tail points");
}

}  // namespace

EmpiricalChiU empirical_chi_u(const std::vector<double>& x,
                              const std::vector<double>& y, double u) {
  check_inputs(x.size(), y.size(), u);
  return chi_from_ranks(average_ranks(x), average_ranks(y), u);
}

std::vector<double> default_u_grid() {
  std::vector<double> g(40);
  for (int i = 0; i < 40; ++i) g[i] = 0.5 + (0.995 - 0.5) * i / 39.0;
  return g;
}

namespace {

void check_grid(const std::vector<double>& u_grid) {
  if (u_grid.empty()) throw InputError("chi_curve: empty u grid");
  if (!std::is_sorted(u_grid.begin(), u_grid.end()))
    throw InputError("chi_curve: u grid must be sorted ascending");
}

}  // namespace

ChiCurve empirical_chi_curve(const std::vector<double>& x,
                             const std::vector<double>& y,
                             const std::vector<double>& u_grid,
                             int bootstrap_B, double level, RngStream rng) {
  check_grid(u_grid);
  check_inputs(x.size(), y.size(), u_grid.front());
  check_inputs(x.size(), y.size(), u_grid.back());
  ChiCurve curve;
  curve.u_grid = u_grid;
  curve.source = "empirical";
  std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  for (double u : u_grid) {
    EmpiricalChiU e = chi_from_ranks(rx, ry, u);
    curve.values.push_back(e.defined ? e.value : kNan);
  }
  if (bootstrap_B <= 0) return curve;
  if (!(level > 0.0 && level < 1.0))
    throw InputError("chi_curve: band level must lie in (0,1)");

  const int n = static_cast<int>(x.size());
  const std::size_t g = u_grid.size();
  std::vector<std::vector<double>> reps(
      static_cast<std::size_t>(bootstrap_B));
  parallel_for(bootstrap_B, [&](long b) {
    RngStream r = rng.substream(static_cast<std::uint32_t>(b + 1));
    std::vector<int> idx =
        bootstrap_indices(n, BootstrapScheme::iid, 0, r);
    std::vector<double> xb(n), yb(n);
    for (int i = 0; i < n; ++i) {
      xb[i] = x[static_cast<std::size_t>(idx[i])];
      yb[i] = y[static_cast<std::size_t>(idx[i])];
    }
    std::vector<double> rxb = average_ranks(xb), ryb = average_ranks(yb);
    std::vector<double> row(g);
    for (std::size_t k = 0; k < g; ++k) {
      EmpiricalChiU e = chi_from_ranks(rxb, ryb, u_grid[k]);
      row[k] = e.defined ? e.value : kNan;
    }
    reps[static_cast<std::size_t>(b)] = std::move(row);
  });
  double a = (1.0 - level) / 2.0;
  for (std::size_t k = 0; k < g; ++k) {
    std::vector<double> col;
    for (const auto& row : reps)
      if (!std::isnan(row[k])) col.push_back(row[k]);
    if (col.empty()) {
      curve.lower.push_back(kNan);
      curve.upper.push_back(kNan);
      continue;
    }
    std::sort(col.begin(), col.end());
    curve.lower.push_back(empirical_quantile_sorted(col, a));
    curve.upper.push_back(empirical_quantile_sorted(col, 1.0 - a));
  }
  return curve;
}

ChiCurve model_chi_curve(const std::function<double(double)>& chi_u,
                         const std::vector<double>& u_grid,
                         const std::string& source) {
  check_grid(u_grid);
  ChiCurve curve;
  curve.u_grid = u_grid;
  curve.source = source;
  for (double u : u_grid) curve.values.push_back(chi_u(u));
  return curve;
}

}  // namespace tailattrib
