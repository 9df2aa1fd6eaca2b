#include "tailattrib/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "tailattrib/errors.hpp"

namespace tailattrib {

namespace {
constexpr double kPi = 3.14159265358979323846264338;
constexpr double kSqrt2 = 1.41421356237309504880168872;
constexpr double kSqrt2Pi = 2.50662827463100050241576528;
}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal quantile: p must be in (0,1)");
  // Acklam's rational approximation plus one Halley step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = std_normal_cdf(x) - p;
  double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

// Genz's BVND: P(X > h, Y > k) for standard bivariate normal, correlation r.
static double bvn_upper(double h, double k, double r) {
  static const double w6[] = {0.1713244923791704, 0.3607615730481386,
                              0.4679139345726910};
  static const double x6[] = {0.9324695142031521, 0.6612093864662645,
                              0.2386191860831969};
  static const double w12[] = {0.04717533638651183, 0.1069393259953184,
                               0.1600783285433462,  0.2031674267230659,
                               0.2334925365383548,  0.2491470458134028};
  static const double x12[] = {0.9815606342467192, 0.9041172563704749,
                               0.7699026741943047, 0.5873179542866175,
                               0.3678314989981802, 0.1252334085114689};
  static const double w20[] = {0.01761400713915212, 0.04060142980038694,
                               0.06267204833410907, 0.08327674157670475,
                               0.1019301198172404,  0.1181945319615184,
                               0.1316886384491766,  0.1420961093183820,
                               0.1491729864726037,  0.1527533871307258};
  static const double x20[] = {0.9931285991850949,  0.9639719272779138,
                               0.9122344282513259,  0.8391169718222188,
                               0.7463319064601508,  0.6360536807265150,
                               0.5108670019508271,  0.3737060887154195,
                               0.2277858511416451,  0.07652652113349733};
  const double* w;
  const double* x;
  int ng;
  if (std::fabs(r) < 0.3) {
    ng = 3; w = w6; x = x6;
  } else if (std::fabs(r) < 0.75) {
    ng = 6; w = w12; x = x12;
  } else {
    ng = 10; w = w20; x = x20;
  }
  double hk = h * k;
  double bvn = 0.0;
  if (std::fabs(r) < 0.925) {
    double hs = (h * h + k * k) / 2.0;
    double asr = std::asin(r);
    for (int i = 0; i < ng; ++i) {
      for (int is = -1; is <= 1; is += 2) {
        double sn = std::sin(asr * (is * x[i] + 1.0) / 2.0);
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / (4.0 * kPi) + std_normal_cdf(-h) * std_normal_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (std::fabs(r) < 1.0) {
      double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      double bs = (h - k) * (h - k);
      double c = (4.0 - hk) / 8.0;
      double d = (12.0 - hk) / 16.0;
      double asr = -(bs / as + hk) / 2.0;
      if (asr > -100.0) {
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 +
               c * d * as * as / 5.0);
      }
      if (-hk < 100.0) {
        double b = std::sqrt(bs);
        bvn -= std::exp(-hk / 2.0) * kSqrt2Pi * std_normal_cdf(-b / a) * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a /= 2.0;
      for (int i = 0; i < ng; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          double xs = a * (is * x[i] + 1.0);
          xs = xs * xs;
          double rs = std::sqrt(1.0 - xs);
          double asr2 = -(bs / xs + hk) / 2.0;
          if (asr2 > -100.0) {
            bvn += a * w[i] * std::exp(asr2) *
                   (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                    (1.0 + c * xs * (1.0 + d * xs)));
          }
        }
      }
      bvn = -bvn / (2.0 * kPi);
    }
    if (r > 0.0) {
      bvn += std_normal_cdf(-std::max(h, k));
    } else {
      bvn = -bvn;
      if (k > h) bvn += std_normal_cdf(k) - std_normal_cdf(h);
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

double bivariate_normal_cdf(double x, double y, double rho) {
  if (!(std::fabs(rho) < 1.0))
    throw std::domain_error("bivariate_normal_cdf: |rho| must be < 1");
  // Saturate far tails so callers can pass semi-infinite arguments.
  if (x < -40.0 || y < -40.0) return 0.0;
  if (x > 40.0) return std_normal_cdf(std::min(y, 40.0));
  if (y > 40.0) return std_normal_cdf(x);
  return bvn_upper(-x, -y, rho);
}

namespace {

// Gauss-Kronrod (G7, K15) nodes and weights on [-1, 1].
const double kGkNodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.000000000000000};
const double kGkWeights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
const double kGaussWeights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

struct Interval {
  double a, b, value, err;
};

Interval gk15(const std::function<double(double)>& f, double a, double b) {
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double fc = f(c);
  double kron = kGkWeights[7] * fc;
  double gauss = kGaussWeights[3] * fc;
  for (int i = 0; i < 7; ++i) {
    double fl = f(c - h * kGkNodes[i]);
    double fr = f(c + h * kGkNodes[i]);
    kron += kGkWeights[i] * (fl + fr);
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * (fl + fr);
  }
  kron *= h;
  gauss *= h;
  double diff = std::fabs(kron - gauss);
  double err = diff;
  if (diff > 0.0) err = std::min(diff, std::pow(200.0 * diff, 1.5));
  return {a, b, kron, err};
}

}  // namespace

double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    double rel_tol) {
  if (a == b) return 0.0;
  std::vector<Interval> segs;
  segs.push_back(gk15(f, a, b));
  const int max_segs = 4000;
  for (;;) {
    double total = 0.0, err = 0.0, worst_err = -1.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      total += segs[i].value;
      err += segs[i].err;
      if (segs[i].err > worst_err) {
        worst_err = segs[i].err;
        worst = i;
      }
    }
    double scale = std::max(std::fabs(total), 1e-300);
    if (err <= rel_tol * scale || worst_err <= 1e-16 * scale) return total;
    if (static_cast<int>(segs.size()) >= max_segs)
      throw NumericalError("integrate_1d: subdivision budget exhausted", total);
    Interval w = segs[worst];
    double mid = 0.5 * (w.a + w.b);
    segs[worst] = gk15(f, w.a, mid);
    segs.push_back(gk15(f, mid, w.b));
  }
}

double sample_positive_stable(double alpha, RngStream& rng) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::domain_error("sample_positive_stable: alpha must be in (0,1]");
  if (alpha == 1.0) return 1.0;
  // Kanter's representation.
  double u = kPi * rng.uniform();
  double w = rng.exponential();
  double ta = 1.0 - alpha;
  double log_a = std::log(std::sin(ta * u)) +
                 (alpha / ta) * std::log(std::sin(alpha * u)) -
                 (1.0 / ta) * std::log(std::sin(u));
  return std::exp((ta / alpha) * (log_a - std::log(w)));
}

LMoments l_moments(const std::vector<double>& sample) {
  const std::size_t n = sample.size();
  if (n < 4) throw InputError("l_moments: need at least 4 points");
  std::vector<double> x(sample);
  std::sort(x.begin(), x.end());
  double b0 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0;
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double di = static_cast<double>(i);  // zero-based order index
    b0 += x[i];
    b1 += x[i] * di / (dn - 1.0);
    b2 += x[i] * di * (di - 1.0) / ((dn - 1.0) * (dn - 2.0));
    b3 += x[i] * di * (di - 1.0) * (di - 2.0) /
          ((dn - 1.0) * (dn - 2.0) * (dn - 3.0));
  }
  b0 /= dn; b1 /= dn; b2 /= dn; b3 /= dn;
  LMoments r;
  r.l1 = b0;
  r.l2 = 2.0 * b1 - b0;
  double l3 = 6.0 * b2 - 6.0 * b1 + b0;
  double l4 = 20.0 * b3 - 30.0 * b2 + 12.0 * b1 - b0;
  r.t = r.l2 != 0.0 || r.l1 != 0.0 ? r.l2 / r.l1 : 0.0;
  r.t3 = r.l2 != 0.0 ? l3 / r.l2 : 0.0;
  r.t4 = r.l2 != 0.0 ? l4 / r.l2 : 0.0;
  return r;
}

Eigen::MatrixXd pseudo_uniforms(const Eigen::MatrixXd& data) {
  const long n = data.rows(), d = data.cols();
  Eigen::MatrixXd u(n, d);
  std::vector<long> idx(static_cast<std::size_t>(n));
  for (long j = 0; j < d; ++j) {
    for (long i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::sort(idx.begin(), idx.end(), [&](long a, long b) {
      return data(a, j) < data(b, j);
    });
    long i = 0;
    while (i < n) {
      long k = i;
      while (k + 1 < n && data(idx[static_cast<std::size_t>(k + 1)], j) ==
                              data(idx[static_cast<std::size_t>(i)], j))
        ++k;
      double avg = 0.5 * static_cast<double>(i + k) + 1.0;  // average rank
      for (long t = i; t <= k; ++t)
        u(idx[static_cast<std::size_t>(t)], j) =
            avg / static_cast<double>(n + 1);
      i = k + 1;
    }
  }
  return u;
}

const GaussLegendre& gauss_legendre(int n) {
  static std::map<int, GaussLegendre> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw std::domain_error("gauss_legendre: n must be positive");
  GaussLegendre gl;
  gl.nodes.resize(static_cast<std::size_t>(n));
  gl.weights.resize(static_cast<std::size_t>(n));
  // Newton iteration on P_n with the Chebyshev-angle starting guess.
  int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    gl.nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
    gl.nodes[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (1.0 + x);
    gl.weights[static_cast<std::size_t>(i)] = 0.5 * w;
    gl.weights[static_cast<std::size_t>(n - 1 - i)] = 0.5 * w;
  }
  return cache.emplace(n, std::move(gl)).first->second;
}

double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw InputError("find_root: endpoints do not bracket a root");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double fmid = f(mid);
    if (fmid == 0.0 || std::fabs(hi - lo) <
                           tol * std::max(1.0, std::fabs(mid)))
      return mid;
    if ((fmid > 0.0) == (flo > 0.0)) {
      lo = mid; flo = fmid;
    } else {
      hi = mid; fhi = fmid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace tailattrib
