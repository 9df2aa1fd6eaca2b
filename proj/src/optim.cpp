#include "tailattrib/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tailattrib/errors.hpp"

namespace tailattrib {

OptimResult nelder_mead(const Objective& objective,
                        const std::vector<double>& x0, double tol,
                        int max_iter, double init_step) {
  const std::size_t n = x0.size();
  double f0 = objective(x0);
  if (!std::isfinite(f0))
    throw InputError("nelder_mead: objective non-finite at x0");
  if (n == 0) return {x0, f0, true, 0};

  // Initial simplex: x0 plus one perturbed vertex per coordinate.
  std::vector<std::vector<double>> v(n + 1, x0);
  std::vector<double> fv(n + 1);
  fv[0] = f0;
  for (std::size_t i = 0; i < n; ++i) {
    double step = init_step * std::max(1.0, std::fabs(x0[i]));
    v[i + 1][i] += step;
    fv[i + 1] = objective(v[i + 1]);
  }

  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  std::vector<std::size_t> order(n + 1);
  int iter = 0;
  bool converged = false;
  for (; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::size_t best = order[0], worst = order[n], second = order[n - 1];

    // Simplex diameter in parameter space.
    double diam = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        diam = std::max(diam, std::fabs(v[order[i]][j] - v[best][j]));
    double fspread = std::fabs(fv[worst] - fv[best]);
    if (diam < tol && fspread < tol * std::max(1.0, std::fabs(fv[best]))) {
      converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += v[i][j];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t j = 0; j < n; ++j)
        p[j] = centroid[j] + t * (centroid[j] - v[worst][j]);
      return p;
    };

    std::vector<double> xr = blend(alpha);
    double fr = objective(xr);
    if (fr < fv[order[0]]) {
      std::vector<double> xe = blend(gamma);
      double fe = objective(xe);
      if (fe < fr) { v[worst] = std::move(xe); fv[worst] = fe; }
      else { v[worst] = std::move(xr); fv[worst] = fr; }
    } else if (fr < fv[second]) {
      v[worst] = std::move(xr);
      fv[worst] = fr;
    } else {
      std::vector<double> xc = blend(fr < fv[worst] ? rho : -rho);
      double fc = objective(xc);
      if (fc < std::min(fr, fv[worst])) {
        v[worst] = std::move(xc);
        fv[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (std::size_t j = 0; j < n; ++j)
            v[i][j] = v[best][j] + sigma * (v[i][j] - v[best][j]);
          fv[i] = objective(v[i]);
        }
      }
    }
  }
  std::size_t best =
      std::min_element(fv.begin(), fv.end()) - fv.begin();
  return {v[best], fv[best], converged, iter};
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double logit(double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(p / (1.0 - p));
}

std::vector<double> softmax(const std::vector<double>& z) {
  double m = *std::max_element(z.begin(), z.end());
  std::vector<double> w(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) { w[i] = std::exp(z[i] - m); s += w[i]; }
  for (double& wi : w) wi /= s;
  return w;
}

}  // namespace

OptimResult nelder_mead_box(const Objective& objective,
                            const std::vector<double>& x0,
                            const std::vector<double>& lower,
                            const std::vector<double>& upper, double tol,
                            int max_iter) {
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n)
    throw InputError("nelder_mead_box: bound size mismatch");
  auto to_x = [&](const std::vector<double>& z) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = lower[i] + (upper[i] - lower[i]) * logistic(z[i]);
    return x;
  };
  std::vector<double> z0(n);
  for (std::size_t i = 0; i < n; ++i)
    z0[i] = logit((x0[i] - lower[i]) / (upper[i] - lower[i]));
  auto obj_z = [&](const std::vector<double>& z) { return objective(to_x(z)); };
  OptimResult r = nelder_mead(obj_z, z0, tol, max_iter);
  r.argmin = to_x(r.argmin);
  return r;
}

OptimResult nelder_mead_simplex(const Objective& objective,
                                const std::vector<double>& w0, double tol,
                                int max_iter) {
  const std::size_t n = w0.size();
  std::vector<double> z0(n);
  for (std::size_t i = 0; i < n; ++i) z0[i] = std::log(std::max(w0[i], 1e-8));
  auto obj_z = [&](const std::vector<double>& z) { return objective(softmax(z)); };
  OptimResult r = nelder_mead(obj_z, z0, tol, max_iter);
  r.argmin = softmax(r.argmin);
  return r;
}

}  // namespace tailattrib
