#include "tailattrib/hw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tailattrib/errors.hpp"
#include "tailattrib/numerics.hpp"
#include "tailattrib/optim.hpp"
#include "tailattrib/parallel.hpp"
#include "tailattrib/univariate.hpp"

namespace tailattrib {

namespace {

constexpr double kDeltaEps = 1e-8;  // switch to the delta = 1/2 limit forms
constexpr long kSimBlock = 1024;

void check_delta(double d) {
  if (!(d >= 0.0 && d <= 1.0))
    throw InputError("hw: dep_delta must lie in [0,1]");
}

Eigen::MatrixXd corr_matrix(const Eigen::MatrixXd& coords, double range) {
  const long d = coords.rows();
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = i + 1; j < d; ++j)
      c(i, j) = c(j, i) =
          std::exp(-(coords.row(i) - coords.row(j)).norm() / range);
  return c;
}

// Normal score of the Exp(1) probability level 1 - e^{-a}, stable in both
// tails.
double exp_to_normal(double a) {
  if (a > 700.0) return 40.0;  // e^{-a} underflows; the normal cdf saturates
  if (a > 0.6931471805599453)
    return -std_normal_quantile(std::exp(-a));
  return std_normal_quantile(-std::expm1(-a));
}

// Joint pieces of the log-W vector (unit exponential margins) under the two
// copula families. Arguments outside the positive quadrant carry no mass.
struct WtPair {
  HwCopulaFamily family;
  double par;  // gaussian correlation or ievl alpha

  double cdf(double a, double b) const {
    if (a <= 0.0 || b <= 0.0) return 0.0;
    if (family == HwCopulaFamily::gaussian) {
      return bivariate_normal_cdf(exp_to_normal(a), exp_to_normal(b), par);
    }
    double al = par;
    double s = std::pow(std::pow(a, 1.0 / al) + std::pow(b, 1.0 / al), al);
    double f = -std::expm1(-a) - std::expm1(-b) - 1.0 + std::exp(-s);
    return std::max(f, 0.0);
  }

  // d/da P(Wt1 <= a, Wt2 <= b).
  double partial1(double a, double b) const {
    if (a <= 0.0 || b <= 0.0) return 0.0;
    if (family == HwCopulaFamily::gaussian) {
      double za = exp_to_normal(a), zb = exp_to_normal(b);
      return std::exp(-a) *
             std_normal_cdf((zb - par * za) / std::sqrt(1.0 - par * par));
    }
    double al = par;
    double u1 = std::pow(a, 1.0 / al), u2 = std::pow(b, 1.0 / al);
    double ssum = u1 + u2;
    double s = std::pow(ssum, al);
    double sa = std::pow(ssum, al - 1.0) * u1 / a;
    return std::max(std::exp(-a) - std::exp(-s) * sa, 0.0);
  }

  double density(double a, double b) const {
    if (a <= 0.0 || b <= 0.0) return 0.0;
    if (family == HwCopulaFamily::gaussian) {
      double za = exp_to_normal(a), zb = exp_to_normal(b);
      double r = par, r2 = 1.0 - r * r;
      double q = (r * r * (za * za + zb * zb) - 2.0 * r * za * zb) / (2.0 * r2);
      return std::exp(-a - b - q) / std::sqrt(r2);
    }
    double al = par;
    double u1 = std::pow(a, 1.0 / al), u2 = std::pow(b, 1.0 / al);
    double ssum = u1 + u2;
    double s = std::pow(ssum, al);
    double sa = std::pow(ssum, al - 1.0) * u1 / a;
    double sb = std::pow(ssum, al - 1.0) * u2 / b;
    double sab =
        (al - 1.0) / al * std::pow(ssum, al - 2.0) * (u1 / a) * (u2 / b);
    return std::max(std::exp(-s) * (sa * sb - sab), 0.0);
  }
};

// Mixing integral over R: int_0^T g(a1(r), a2(r)) e^{-r} dr with the
// substitution t = 1 - e^{-r}, either adaptively or on fixed GL nodes.
template <class G>
double mix_integral(double lx1, double lx2, double delta, const G& g,
                    int gl_order) {
  double tmax = std::min(lx1, lx2) / delta;
  if (tmax <= 0.0) return 0.0;
  double t1 = -std::expm1(-tmax);
  auto h = [&](double t) {
    double r = -std::log1p(-t);
    double a1 = (lx1 - delta * r) / (1.0 - delta);
    double a2 = (lx2 - delta * r) / (1.0 - delta);
    return g(a1, a2);
  };
  if (gl_order <= 0) {
    // Adaptive path works in r: under the t substitution the g-variation
    // near r = tmax collapses into a boundary layer of width e^{-tmax} that
    // adaptive subdivision can silently step over at extreme levels.
    // Unit-scale panels keep each adaptive call well conditioned.
    auto hr = [&](double r) {
      double a1 = (lx1 - delta * r) / (1.0 - delta);
      double a2 = (lx2 - delta * r) / (1.0 - delta);
      return g(a1, a2) * std::exp(-r);
    };
    double acc = 0.0;
    for (double lo = 0.0; lo < tmax; lo += 5.0)
      acc += integrate_1d(hr, lo, std::min(tmax, lo + 5.0), 1e-10);
    return acc;
  }
  const GaussLegendre& gl = gauss_legendre(gl_order);
  double acc = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i)
    acc += gl.weights[i] * h(gl.nodes[i] * t1);
  return acc * t1;
}

void check_pair_args(double x1, double x2, double delta) {
  if (!(x1 >= 1.0 && x2 >= 1.0))
    throw std::domain_error("hw pair: arguments must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw InputError("hw pair: dep_delta must be interior");
}

}  // namespace

HwModel make_hw_model_gaussian(double dep_delta, double range,
                               const Eigen::MatrixXd& coords) {
  check_delta(dep_delta);
  if (!(range > 0.0)) throw InputError("hw: range must be positive");
  if (coords.cols() != 2) throw InputError("hw: coords must be d x 2");
  HwModel m;
  m.dep_delta = dep_delta;
  m.w_copula = HwCopulaFamily::gaussian;
  m.range = range;
  m.coords = coords;
  m.corr = corr_matrix(coords, range);
  return m;
}

HwModel make_hw_model_ievl(double dep_delta, double alpha,
                           const Eigen::MatrixXd& coords) {
  check_delta(dep_delta);
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw InputError("hw: ievl alpha must lie in (0,1]");
  if (coords.cols() != 2) throw InputError("hw: coords must be d x 2");
  HwModel m;
  m.dep_delta = dep_delta;
  m.w_copula = HwCopulaFamily::ievl;
  m.ievl_alpha = alpha;
  m.coords = coords;
  return m;
}

Eigen::MatrixXd hw_simulate_w(const HwModel& model, int n, RngStream rng) {
  const long d = model.coords.rows();
  Eigen::MatrixXd out(n, d);
  if (model.w_copula == HwCopulaFamily::gaussian) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.corr);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw InputError("hw_simulate: correlation matrix is not PSD");
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd L = es.eigenvectors() * ev.asDiagonal();
    long n_blocks = (n + kSimBlock - 1) / kSimBlock;
    parallel_for(n_blocks, [&](long blk) {
      RngStream local = rng.substream(static_cast<std::uint32_t>(blk));
      long lo = blk * kSimBlock, hi = std::min<long>(n, lo + kSimBlock);
      Eigen::VectorXd g(d);
      for (long i = lo; i < hi; ++i) {
        for (long j = 0; j < d; ++j) g[j] = local.gauss();
        Eigen::VectorXd z = L * g;
        for (long j = 0; j < d; ++j)
          out(i, j) = 1.0 / (1.0 - std_normal_cdf(z[j]));
      }
    });
    return out;
  }
  double alpha = model.ievl_alpha;
  long n_blocks = (n + kSimBlock - 1) / kSimBlock;
  parallel_for(n_blocks, [&](long blk) {
    RngStream local = rng.substream(static_cast<std::uint32_t>(blk));
    long lo = blk * kSimBlock, hi = std::min<long>(n, lo + kSimBlock);
    for (long i = lo; i < hi; ++i) {
      double s = sample_positive_stable(alpha, local);
      // Logistic max-stable Frechet vector Z_j = (s / E_j)^alpha; the
      // inverted-and-exponentiated components have standard Pareto margins.
      for (long j = 0; j < d; ++j) {
        double e = local.exponential();
        out(i, j) = std::exp(std::pow(e / s, alpha));
      }
    }
  });
  return out;
}

Eigen::MatrixXd hw_simulate(const HwModel& model, int n, RngStream rng) {
  const long d = model.coords.rows();
  double delta = model.dep_delta;
  Eigen::MatrixXd w = hw_simulate_w(model, n, rng.substream(0));
  RngStream rrng = rng.substream(1);
  long n_blocks = (n + kSimBlock - 1) / kSimBlock;
  parallel_for(n_blocks, [&](long blk) {
    RngStream local = rrng.substream(static_cast<std::uint32_t>(blk));
    long lo = blk * kSimBlock, hi = std::min<long>(n, lo + kSimBlock);
    for (long i = lo; i < hi; ++i) {
      double r = 1.0 / local.uniform();  // standard Pareto
      for (long j = 0; j < d; ++j)
        w(i, j) = std::pow(r, delta) * std::pow(w(i, j), 1.0 - delta);
    }
  });
  return w;
}

double hw_marginal_survival(double x, double dep_delta) {
  check_delta(dep_delta);
  if (!(x >= 1.0)) throw std::domain_error("hw marginal: x must be >= 1");
  double d = dep_delta;
  if (std::fabs(2.0 * d - 1.0) < kDeltaEps)
    return (1.0 + 2.0 * std::log(x)) / (x * x);
  double s = d / (2.0 * d - 1.0) * std::pow(x, -1.0 / d) -
             (1.0 - d) / (2.0 * d - 1.0) * std::pow(x, -1.0 / (1.0 - d));
  return std::min(1.0, std::max(0.0, s));
}

double hw_marginal_density(double x, double dep_delta) {
  check_delta(dep_delta);
  if (!(x >= 1.0)) throw std::domain_error("hw marginal: x must be >= 1");
  double d = dep_delta;
  if (std::fabs(2.0 * d - 1.0) < kDeltaEps)
    return 4.0 * std::log(x) / (x * x * x);
  return (std::pow(x, -1.0 / d - 1.0) - std::pow(x, -1.0 / (1.0 - d) - 1.0)) /
         (2.0 * d - 1.0);
}

double hw_marginal_quantile(double u, double dep_delta) {
  check_delta(dep_delta);
  if (!(u > 0.0 && u < 1.0))
    throw InputError("hw_marginal_quantile: u outside (0,1)");
  double target = 1.0 - u;
  double hi = 2.0;
  while (hw_marginal_survival(hi, dep_delta) > target && hi < 1e300) hi *= 2.0;
  // Solve in log-space for uniform relative accuracy.
  double ly = find_root(
      [&](double l) {
        return hw_marginal_survival(std::exp(l), dep_delta) - target;
      },
      0.0, std::log(hi), 1e-12);
  return std::exp(ly);
}

HwChiResult hw_chi(const HwModel& model, long n_mc, RngStream rng) {
  double d = model.dep_delta;
  HwChiResult res;
  if (d < 0.5 - 1e-12) {
    res.asymp_indep = true;
    return res;
  }
  if (std::fabs(d - 0.5) <= 1e-12) return res;  // boundary: chi = 0
  if (d >= 1.0 - 1e-12) {
    res.value = 1.0;
    return res;
  }
  if (model.coords.rows() < 2) throw InputError("hw_chi: need >= 2 sites");
  double expo = (1.0 - d) / d;
  long n_blocks = (n_mc + kSimBlock - 1) / kSimBlock;
  std::vector<double> partial(static_cast<std::size_t>(n_blocks), 0.0);
  // Reuse the W sampler via per-block substreams for bit-stable parallelism.
  Eigen::MatrixXd w = hw_simulate_w(model, static_cast<int>(n_mc), rng);
  parallel_for(n_blocks, [&](long blk) {
    long lo = blk * kSimBlock, hi = std::min<long>(n_mc, lo + kSimBlock);
    double acc = 0.0;
    for (long i = lo; i < hi; ++i)
      acc += std::pow(std::min(w(i, 0), w(i, 1)), expo);
    partial[static_cast<std::size_t>(blk)] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  res.value = std::min(1.0, total / static_cast<double>(n_mc) *
                                (2.0 * d - 1.0) / d);
  return res;
}

double hw_pair_cdf(double x1, double x2, double dep_delta,
                   HwCopulaFamily family, double dep_par, int gl_order) {
  check_pair_args(x1, x2, dep_delta);
  WtPair wt{family, dep_par};
  return mix_integral(
      std::log(x1), std::log(x2), dep_delta,
      [&](double a, double b) { return wt.cdf(a, b); }, gl_order);
}

double hw_pair_partial1(double x1, double x2, double dep_delta,
                        HwCopulaFamily family, double dep_par, int gl_order) {
  check_pair_args(x1, x2, dep_delta);
  WtPair wt{family, dep_par};
  double v = mix_integral(
      std::log(x1), std::log(x2), dep_delta,
      [&](double a, double b) { return wt.partial1(a, b); }, gl_order);
  return v / ((1.0 - dep_delta) * x1);
}

double hw_pair_density(double x1, double x2, double dep_delta,
                       HwCopulaFamily family, double dep_par, int gl_order) {
  check_pair_args(x1, x2, dep_delta);
  WtPair wt{family, dep_par};
  double v = mix_integral(
      std::log(x1), std::log(x2), dep_delta,
      [&](double a, double b) { return wt.density(a, b); }, gl_order);
  double s = (1.0 - dep_delta);
  return v / (s * s * x1 * x2);
}

double hw_chi_u(const HwModel& model, double u) {
  if (!(u >= 0.5 && u < 1.0))
    throw std::domain_error("hw_chi_u: u must be in [0.5, 1)");
  double d = model.dep_delta;
  if (!(d > 0.0 && d < 1.0))
    throw InputError("hw_chi_u: dep_delta must be interior");
  if (model.coords.rows() < 2) throw InputError("hw_chi_u: need >= 2 sites");
  double par = model.w_copula == HwCopulaFamily::gaussian ? model.corr(0, 1)
                                                          : model.ievl_alpha;
  double x = hw_marginal_quantile(u, d);
  double f = hw_pair_cdf(x, x, d, model.w_copula, par, 0);
  double chi = (1.0 - 2.0 * u + f) / (1.0 - u);
  return std::min(1.0, std::max(0.0, chi));
}

namespace {

struct PairTerms {
  long j, k;
  double dist;
};

}  // namespace

HwModel hw_fit(const Eigen::MatrixXd& data, const Eigen::MatrixXd& coords,
               double censor_q, const HwFitOptions& options) {
  const long n = data.rows(), d = data.cols();
  const int kGl = 24;
  if (n < 200) throw InputError("hw_fit: need n >= 200");
  if (d < 2) throw InputError("hw_fit: need d >= 2");
  if (!(censor_q >= 0.0 && censor_q < 1.0))
    throw InputError("hw_fit: censor_q outside [0,1)");
  if (coords.rows() != d) throw InputError("hw_fit: coords/site mismatch");
  const bool gaussian = options.family == HwCopulaFamily::gaussian;
  if (!options.rank_margins && data.minCoeff() < 1.0)
    throw InputError("hw_fit: model-scale data must be >= 1");

  std::vector<PairTerms> pairs;
  std::vector<double> med_src;
  for (long j = 0; j < d; ++j)
    for (long k = j + 1; k < d; ++k) {
      double h = (coords.row(j) - coords.row(k)).norm();
      if (gaussian && h <= 0.0)
        throw InputError("hw_fit: coincident sites give a singular corr");
      pairs.push_back({j, k, h});
      med_src.push_back(h);
    }
  std::nth_element(med_src.begin(), med_src.begin() + med_src.size() / 2,
                   med_src.end());
  double med_h = std::max(med_src[med_src.size() / 2], 1e-6);

  Eigen::MatrixXd pu;
  Eigen::VectorXd cens(d);  // per-site censor threshold on the data scale
  if (options.rank_margins) {
    pu = pseudo_uniforms(data);
  } else {
    for (long j = 0; j < d; ++j) {
      std::vector<double> col(data.col(j).data(), data.col(j).data() + n);
      cens[j] = censor_q > 0.0 ? empirical_quantile(col, censor_q) : 1.0;
    }
  }

  // params: [0] dep_delta; [1] log range (gaussian) or alpha (ievl).
  const double del_lo = 1e-4, del_hi = 0.99999;
  const bool two_par = !options.fix_dependence;
  auto nll = [&](const std::vector<double>& p) {
    double delta = p[0];
    double dep_main = two_par ? p[1]
                     : gaussian ? std::log(options.fixed_range)
                                : options.fixed_alpha;
    double range = gaussian ? std::exp(dep_main) : 0.0;
    double alpha = gaussian ? 0.0 : dep_main;

    Eigen::MatrixXd xv;  // data on the model scale
    Eigen::VectorXd xq(d);
    if (options.rank_margins) {
      xv = Eigen::MatrixXd::Zero(n, d);
      double xq_all =
          censor_q > 0.0 ? hw_marginal_quantile(censor_q, delta) : 1.0;
      for (long j = 0; j < d; ++j) {
        xq[j] = xq_all;
        for (long i = 0; i < n; ++i)
          if (pu(i, j) > censor_q)
            xv(i, j) = hw_marginal_quantile(pu(i, j), delta);
      }
    } else {
      xq = cens;
    }
    const Eigen::MatrixXd& xd = options.rank_margins ? xv : data;

    double total = 0.0;
    for (const auto& pr : pairs) {
      double par = gaussian
                       ? std::min(std::exp(-pr.dist / range), 1.0 - 1e-10)
                       : alpha;
      double log_cqq =
          censor_q > 0.0
              ? std::log(std::max(hw_pair_cdf(xq[pr.j], xq[pr.k], delta,
                                              options.family, par, kGl),
                                  1e-300))
              : 0.0;
      auto above = [&](long i, long j) {
        return options.rank_margins ? pu(i, j) > censor_q
                                    : data(i, j) > cens[j];
      };
      double ll = 0.0;
      for (long i = 0; i < n; ++i) {
        bool e1 = above(i, pr.j), e2 = above(i, pr.k);
        double t;
        if (e1 && e2)
          t = std::log(std::max(hw_pair_density(xd(i, pr.j), xd(i, pr.k),
                                                delta, options.family, par,
                                                kGl),
                                1e-300));
        else if (e1)
          t = std::log(std::max(hw_pair_partial1(xd(i, pr.j), xq[pr.k], delta,
                                                 options.family, par, kGl),
                                1e-300));
        else if (e2)
          t = std::log(std::max(hw_pair_partial1(xd(i, pr.k), xq[pr.j], delta,
                                                 options.family, par, kGl),
                                1e-300));
        else {
          ll += log_cqq;
          continue;
        }
        if (options.rank_margins) {
          if (e1) t -= std::log(hw_marginal_density(xd(i, pr.j), delta));
          if (e2) t -= std::log(hw_marginal_density(xd(i, pr.k), delta));
        }
        ll += t;
      }
      total += ll;
    }
    return std::isfinite(total) ? -total : 1e12;
  };

  std::vector<double> lower{del_lo}, upper{del_hi};
  if (two_par) {
    if (gaussian) {
      lower.push_back(std::log(1e-2));
      upper.push_back(std::log(1e2));
    } else {
      lower.push_back(0.05);
      upper.push_back(1.0 - 1e-6);
    }
  }
  double dep0 = gaussian
                    ? std::min(std::max(std::log(med_h), lower.back() + 0.1),
                               upper.back() - 0.1)
                    : 0.5;
  std::vector<std::vector<double>> starts;
  for (double d0 : {0.3, 0.7}) {
    std::vector<double> s{d0};
    if (two_par) s.push_back(dep0);
    starts.push_back(s);
  }
  OptimResult best;
  best.objective_value = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    OptimResult r = nelder_mead_box(nll, s, lower, upper, 1e-6, 1500);
    if (r.converged && r.objective_value < best.objective_value) best = r;
  }
  if (!std::isfinite(best.objective_value))
    throw NumericalError("hw_fit: optimizer did not converge", 0.0);

  double delta_hat = best.argmin[0];
  double range_hat = options.fixed_range, alpha_hat = options.fixed_alpha;
  if (two_par) {
    if (gaussian)
      range_hat = std::exp(best.argmin[1]);
    else
      alpha_hat = best.argmin[1];
  }
  HwModel m = gaussian ? make_hw_model_gaussian(delta_hat, range_hat, coords)
                       : make_hw_model_ievl(delta_hat, alpha_hat, coords);
  m.converged = true;
  m.neg_log_lik = best.objective_value;

  if (options.profile) {
    std::vector<double> grid;
    for (double g = 0.05; g < 0.951; g += 0.05) grid.push_back(g);
    grid.insert(grid.end(), {0.99, 0.999, 0.9999, 0.99999});
    double warm = two_par ? best.argmin[1] : 0.0;
    for (double g : grid) {
      double v;
      if (two_par) {
        auto prof = [&](const std::vector<double>& q) {
          return nll({g, q[0]});
        };
        OptimResult r = nelder_mead_box(prof, {warm}, {lower[1]}, {upper[1]},
                                        1e-4, 200);
        v = r.objective_value;
        if (r.converged) warm = r.argmin[0];
      } else {
        v = nll({g});
      }
      m.profile_delta.push_back(g);
      m.profile_nll.push_back(v);
    }
  }
  return m;
}

}  // namespace tailattrib
