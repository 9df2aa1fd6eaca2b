#include "tailattrib/regions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tailattrib/errors.hpp"
#include "tailattrib/numerics.hpp"
#include "tailattrib/optim.hpp"
#include "tailattrib/univariate.hpp"

namespace tailattrib {

Eigen::MatrixXd build_grid(const BoundingBox& bbox, double spacing_deg) {
  if (spacing_deg <= 0.0) throw InputError("build_grid: spacing must be > 0");
  if (bbox.lat_max < bbox.lat_min || bbox.lon_max < bbox.lon_min)
    throw InputError("build_grid: empty bounding box");
  const double eps = 1e-9;
  int n_lat =
      static_cast<int>((bbox.lat_max - bbox.lat_min) / spacing_deg + eps) + 1;
  int n_lon =
      static_cast<int>((bbox.lon_max - bbox.lon_min) / spacing_deg + eps) + 1;
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(n_lat) * n_lon, 2);
  int r = 0;
  for (int i = 0; i < n_lat; ++i)
    for (int j = 0; j < n_lon; ++j) {
      grid(r, 0) = bbox.lat_min + i * spacing_deg;
      grid(r, 1) = bbox.lon_min + j * spacing_deg;
      ++r;
    }
  return grid;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kDeg = 0.017453292519943295;
  constexpr double kEarthRadiusKm = 6371.0;
  double dlat = 0.5 * (lat2 - lat1) * kDeg;
  double dlon = 0.5 * (lon2 - lon1) * kDeg;
  double a = std::sin(dlat) * std::sin(dlat) +
             std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) * std::sin(dlon) *
                 std::sin(dlon);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

namespace {

// Four-parameter kappa quantile; h = 1 is the GPD, h -> 0 the GEV.
double kappa_quantile(double f, double xi, double alpha, double k, double h) {
  double y;
  if (std::fabs(h) < 1e-10)
    y = -std::log(f);
  else
    y = (1.0 - std::pow(f, h)) / h;
  if (std::fabs(k) < 1e-10) return xi - alpha * std::log(y);
  return xi + alpha / k * (1.0 - std::pow(y, k));
}

struct KappaRatios {
  double l1, l2, t3, t4;
  bool valid;
};

// L-moments of kappa(0, 1, k, h) by quadrature against shifted Legendre
// polynomials.
KappaRatios kappa_l_moments(double k, double h) {
  if (k <= -0.98 || (h < 0.0 && h * k <= -0.98) || k > 10.0 ||
      std::fabs(h) > 10.0)
    return {0, 0, 0, 0, false};
  const GaussLegendre& gl = gauss_legendre(196);
  double m[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    double f = gl.nodes[i];
    double x = kappa_quantile(f, 0.0, 1.0, k, h);
    if (!std::isfinite(x)) return {0, 0, 0, 0, false};
    double p1 = 2.0 * f - 1.0;
    double p2 = 6.0 * f * f - 6.0 * f + 1.0;
    double p3 = 20.0 * f * f * f - 30.0 * f * f + 12.0 * f - 1.0;
    m[0] += gl.weights[i] * x;
    m[1] += gl.weights[i] * x * p1;
    m[2] += gl.weights[i] * x * p2;
    m[3] += gl.weights[i] * x * p3;
  }
  if (m[1] <= 0.0) return {0, 0, 0, 0, false};
  return {m[0], m[1], m[2] / m[1], m[3] / m[1], true};
}

struct FittedKappa {
  double xi, alpha, k, h;
  bool gpd_fallback;
};

// Matches (t3, t4), then solves (xi, alpha) linearly from (l1, l2).
FittedKappa fit_kappa(double l1, double l2, double t3, double t4) {
  auto mismatch = [&](const std::vector<double>& p) {
    KappaRatios r = kappa_l_moments(p[0], p[1]);
    if (!r.valid) return 1e6;
    double a = r.t3 - t3, b = r.t4 - t4;
    return a * a + b * b;
  };
  FittedKappa out{0.0, 1.0, 0.0, 1.0, false};
  bool ok = false;
  for (auto start : {std::vector<double>{0.1, 0.5},
                     std::vector<double>{-0.2, 1.0},
                     std::vector<double>{0.3, -0.2}}) {
    OptimResult r = nelder_mead(mismatch, start, 1e-10, 2000, 0.2);
    if (r.converged && r.objective_value < 1e-8) {
      out.k = r.argmin[0];
      out.h = r.argmin[1];
      ok = true;
      break;
    }
  }
  if (!ok) {
    // GPD branch (h = 1): closed-form shape from t3.
    out.gpd_fallback = true;
    out.h = 1.0;
    out.k = std::clamp((1.0 - 3.0 * t3) / (1.0 + t3), -0.95, 10.0);
  }
  KappaRatios base = kappa_l_moments(out.k, out.h);
  if (!base.valid)
    throw NumericalError("hosking_wallis_H: kappa moment evaluation failed",
                         0.0);
  out.alpha = l2 / base.l2;
  out.xi = l1 - out.alpha * base.l1;
  return out;
}

// Record-length-weighted L-CV dispersion (the V1 statistic).
double v_statistic(const std::vector<double>& t, const std::vector<double>& n) {
  double tw = 0.0, nw = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    tw += n[i] * t[i];
    nw += n[i];
  }
  tw /= nw;
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    s += n[i] * (t[i] - tw) * (t[i] - tw);
  return std::sqrt(s / nw);
}

}  // namespace

HwHResult hosking_wallis_H(const std::vector<std::vector<double>>& samples,
                           int n_sim, RngStream rng) {
  if (samples.size() < 2)
    throw InputError("hosking_wallis_H: need at least 2 sites");
  for (const auto& s : samples)
    if (s.size() < 20)
      throw InputError("hosking_wallis_H: each site needs >= 20 exceedances");
  if (n_sim < 50) throw InputError("hosking_wallis_H: n_sim too small");

  const std::size_t k = samples.size();
  std::vector<double> t(k), n(k);
  double l1r = 0.0, l2r = 0.0, t3r = 0.0, t4r = 0.0, nw = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    LMoments lm = l_moments(samples[i]);
    t[i] = lm.t;
    n[i] = static_cast<double>(samples[i].size());
    // Sites are rescaled to unit mean (index-flood convention) before the
    // regional average.
    l1r += n[i] * 1.0;
    l2r += n[i] * lm.t;
    t3r += n[i] * lm.t3;
    t4r += n[i] * lm.t4;
    nw += n[i];
  }
  l1r /= nw;
  l2r /= nw;
  t3r /= nw;
  t4r /= nw;
  double v_obs = v_statistic(t, n);

  FittedKappa kap = fit_kappa(l1r, l2r, t3r, t4r);
  std::vector<double> v_sim(static_cast<std::size_t>(n_sim));
  for (int s = 0; s < n_sim; ++s) {
    RngStream r = rng.substream(static_cast<std::uint32_t>(s + 1));
    std::vector<double> ts(k);
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> x(samples[i].size());
      for (double& xv : x)
        xv = kappa_quantile(r.uniform(), kap.xi, kap.alpha, kap.k, kap.h);
      ts[i] = l_moments(x).t;
    }
    v_sim[static_cast<std::size_t>(s)] = v_statistic(ts, n);
  }
  double mu = 0.0;
  for (double v : v_sim) mu += v;
  mu /= n_sim;
  double var = 0.0;
  for (double v : v_sim) var += (v - mu) * (v - mu);
  var /= (n_sim - 1);
  double sd = std::sqrt(std::max(var, 1e-300));
  return {(v_obs - mu) / sd, kap.gpd_fallback};
}

AdResult anderson_darling_k(const std::vector<std::vector<double>>& samples) {
  const std::size_t k = samples.size();
  if (k < 2) throw InputError("anderson_darling_k: need at least 2 samples");
  for (const auto& s : samples)
    if (s.size() < 10)
      throw InputError("anderson_darling_k: each sample needs >= 10 points");

  std::vector<double> pooled;
  for (const auto& s : samples) pooled.insert(pooled.end(), s.begin(), s.end());
  std::sort(pooled.begin(), pooled.end());
  const double nn = static_cast<double>(pooled.size());
  const std::size_t n_total = pooled.size();

  // Distinct pooled values and multiplicities.
  std::vector<double> z;
  std::vector<double> lj;
  std::size_t i = 0;
  while (i < n_total) {
    std::size_t j = i;
    while (j + 1 < n_total && pooled[j + 1] == pooled[i]) ++j;
    z.push_back(pooled[i]);
    lj.push_back(static_cast<double>(j - i + 1));
    i = j + 1;
  }
  const std::size_t L = z.size();

  // Per-sample counts at each distinct value.
  std::vector<std::vector<double>> f(k, std::vector<double>(L, 0.0));
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<double> sorted = samples[s];
    std::sort(sorted.begin(), sorted.end());
    std::size_t pos = 0;
    for (std::size_t j = 0; j < L; ++j) {
      while (pos < sorted.size() && sorted[pos] == z[j]) {
        f[s][j] += 1.0;
        ++pos;
      }
    }
  }

  // Midrank (tie-adjusted) statistic A2_akN.
  double a2 = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    double ni = static_cast<double>(samples[s].size());
    double m_cum = 0.0, b_cum = 0.0;
    double inner = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
      double maij = m_cum + 0.5 * f[s][j];
      double baj = b_cum + 0.5 * lj[j];
      double denom = baj * (nn - baj) - nn * lj[j] / 4.0;
      if (denom > 0.0) {
        double num = nn * maij - ni * baj;
        inner += lj[j] / nn * num * num / denom;
      }
      m_cum += f[s][j];
      b_cum += lj[j];
    }
    a2 += inner / ni;
  }
  a2 *= (nn - 1.0) / nn;

  // Scholz-Stephens variance of A2 under the null.
  double H = 0.0;
  for (std::size_t s = 0; s < k; ++s)
    H += 1.0 / static_cast<double>(samples[s].size());
  double h = 0.0;
  for (std::size_t m = 1; m <= n_total - 1; ++m)
    h += 1.0 / static_cast<double>(m);
  double g = 0.0;
  for (std::size_t a = 1; a <= n_total - 2; ++a) {
    double inner = 0.0;
    for (std::size_t b = a + 1; b <= n_total - 1; ++b)
      inner += 1.0 / static_cast<double>(b);
    g += inner / static_cast<double>(n_total - a);
  }
  double kk = static_cast<double>(k);
  double a = (4.0 * g - 6.0) * (kk - 1.0) + (10.0 - 6.0 * g) * H;
  double b = (2.0 * g - 4.0) * kk * kk + 8.0 * h * kk +
             (2.0 * g - 14.0 * h - 4.0) * H - 8.0 * h + 4.0 * g - 6.0;
  double c = (6.0 * h + 2.0 * g - 2.0) * kk * kk +
             (4.0 * h - 4.0 * g + 6.0) * kk + (2.0 * h - 6.0) * H + 4.0 * h;
  double d = (2.0 * h + 6.0) * kk * kk - 4.0 * h * kk;
  double var = (a * nn * nn * nn + b * nn * nn + c * nn + d) /
               ((nn - 1.0) * (nn - 2.0) * (nn - 3.0));
  double sd = std::sqrt(std::max(var, 1e-300));
  double tstat = (a2 - (kk - 1.0)) / sd;

  // Interpolated upper-tail level from the published critical-value
  // approximation tm = b0 + b1/sqrt(m) + b2/m, m = k - 1.
  static const double sig[] = {0.25, 0.10, 0.05, 0.025, 0.01};
  static const double b0[] = {0.675, 1.281, 1.645, 1.960, 2.326};
  static const double b1[] = {-0.245, 0.250, 0.678, 1.149, 1.822};
  static const double b2[] = {-0.105, -0.305, -0.362, -0.391, -0.396};
  double m = kk - 1.0;
  double tm[5], ls[5];
  for (int q = 0; q < 5; ++q) {
    tm[q] = b0[q] + b1[q] / std::sqrt(m) + b2[q] / m;
    ls[q] = std::log(sig[q]);
  }
  double logp;
  if (tstat <= tm[0])
    logp = ls[0] + (tstat - tm[0]) * (ls[1] - ls[0]) / (tm[1] - tm[0]);
  else if (tstat >= tm[4])
    logp = ls[4] + (tstat - tm[4]) * (ls[4] - ls[3]) / (tm[4] - tm[3]);
  else {
    int q = 0;
    while (tstat > tm[q + 1]) ++q;
    logp = ls[q] + (tstat - tm[q]) * (ls[q + 1] - ls[q]) / (tm[q + 1] - tm[q]);
  }
  double p = std::clamp(std::exp(logp), 1e-12, 1.0 - 1e-9);
  return {a2, p};
}

ClusterAssignment grow_cluster(const Eigen::Vector2d& centroid,
                               const Eigen::MatrixXd& site_coords,
                               const WorldSample& factual,
                               const WorldSample& counterfactual, int d0_max,
                               const ClusterCriteria& criteria, RngStream rng) {
  const int d = static_cast<int>(site_coords.rows());
  if (site_coords.cols() != 2)
    throw InputError("grow_cluster: site_coords must be d x 2");
  if (factual.values.cols() != d || counterfactual.values.cols() != d)
    throw InputError("grow_cluster: world dimension mismatch");
  if (d0_max > d) throw InputError("grow_cluster: d0_max exceeds site count");
  if (d0_max < 2) throw InputError("grow_cluster: d0_max must be >= 2");

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dist(d);
  for (int j = 0; j < d; ++j)
    dist[j] = haversine_km(centroid(0), centroid(1), site_coords(j, 0),
                           site_coords(j, 1));
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist[a] < dist[b]; });

  // Mean-scaled exceedances per site per world.
  auto site_excess = [&](const Eigen::MatrixXd& x, int j) {
    std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
    double u = empirical_quantile(col, criteria.threshold_q);
    std::vector<double> exc;
    for (double v : col)
      if (v > u) exc.push_back(v - u);
    return exc;
  };

  ClusterAssignment best;
  best.centroid = centroid;
  best.member_sites = {order[0]};
  best.d0 = 1;
  best.singleton = true;

  for (int d0 = 2; d0 <= d0_max; ++d0) {
    bool pass = true;
    double worst_H = -1e300, worst_p = 1.0;
    for (int world = 0; world < 2 && pass; ++world) {
      const Eigen::MatrixXd& x =
          world == 0 ? factual.values : counterfactual.values;
      std::vector<std::vector<double>> exc, scaled;
      for (int m = 0; m < d0; ++m) {
        std::vector<double> e = site_excess(x, order[m]);
        if (e.size() < 20) {
          pass = false;
          break;
        }
        double mean = std::accumulate(e.begin(), e.end(), 0.0) /
                      static_cast<double>(e.size());
        std::vector<double> s = e;
        for (double& v : s) v /= mean;
        exc.push_back(std::move(e));
        scaled.push_back(std::move(s));
      }
      if (!pass) break;
      HwHResult hh = hosking_wallis_H(
          exc, criteria.n_sim,
          rng.substream(static_cast<std::uint32_t>(2 * d0 + world)));
      AdResult ad = anderson_darling_k(scaled);
      worst_H = std::max(worst_H, hh.H);
      worst_p = std::min(worst_p, ad.p_proxy);
      if (!(hh.H < criteria.H_max && ad.p_proxy > criteria.ad_alpha))
        pass = false;
    }
    if (!pass) break;  // greedy early stop: larger D0 never revisited
    best.member_sites.assign(order.begin(), order.begin() + d0);
    best.d0 = d0;
    best.hw_H = worst_H;
    best.ad_p = worst_p;
    best.singleton = false;
  }
  return best;
}

}  // namespace tailattrib
