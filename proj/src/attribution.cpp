#include "tailattrib/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailattrib/errors.hpp"
#include "tailattrib/optim.hpp"
#include "tailattrib/parallel.hpp"

namespace tailattrib {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
std::vector<double> sorted_column(const Eigen::MatrixXd& m, int j) {
  std::vector<double> v(m.col(j).data(), m.col(j).data() + m.rows());
  std::sort(v.begin(), v.end());
  return v;
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw InputError(std::string(name) + " must lie in [0,1]");
}

Eigen::VectorXd site_thresholds(const Eigen::MatrixXd& values, double q) {
  Eigen::VectorXd u(values.cols());
  for (int j = 0; j < values.cols(); ++j)
    u(j) = empirical_quantile(sorted_column(values, j), q);
  return u;
}

}  // namespace

TailExtendedMargin::TailExtendedMargin(std::vector<double> sample,
                                       double tail_q)
    : sorted_(std::move(sample)), tail_q_(tail_q) {
  if (!(tail_q > 0.5 && tail_q < 1.0))
    throw InputError("TailExtendedMargin: tail_q must lie in (0.5, 1)");
  std::sort(sorted_.begin(), sorted_.end());
  t_ = empirical_quantile_sorted(sorted_, tail_q_);
  std::vector<double> exc;
  for (double x : sorted_)
    if (x > t_) exc.push_back(x - t_);
  if (exc.size() >= 10) {
    try {
      gpd_ = gpd_fit_mle(exc);
      has_tail_ = true;
    } catch (const NumericalError&) {
    }
  }
}

double TailExtendedMargin::survival(double v) const {
  if (!has_tail_ || v <= t_) {
    auto it = std::upper_bound(sorted_.begin(), sorted_.end(), v);
    return static_cast<double>(sorted_.end() - it) /
           static_cast<double>(sorted_.size());
  }
  return (1.0 - tail_q_) * gpd_survival(v - t_, gpd_);
}

double TailExtendedMargin::quantile(double u) const {
  if (!has_tail_ || u <= tail_q_) {
    double x = empirical_quantile_sorted(sorted_, u);
    return has_tail_ ? std::min(x, t_) : x;
  }
  double r = (1.0 - u) / (1.0 - tail_q_);
  if (std::fabs(gpd_.gamma) < 1e-10) return t_ - gpd_.sigma * std::log(r);
  return t_ + gpd_.sigma / gpd_.gamma * (std::pow(r, -gpd_.gamma) - 1.0);
}

WeightVector make_weights(const Eigen::VectorXd& raw) {
  if (raw.size() < 1) throw InputError("weights: empty vector");
  if ((raw.array() < 0.0).any())
    throw InputError("weights: components must be nonnegative");
  double s = raw.sum();
  if (s <= 0.0) throw InputError("weights: must have positive sum");
  return WeightVector{raw / s};
}

AttributionReport causal_metrics(double p0, double p1) {
  check_probability(p0, "p0");
  check_probability(p1, "p1");
  AttributionReport r;
  r.p0 = p0;
  r.p1 = p1;
  if (p1 > 0.0) {
    r.pn = std::max(1.0 - p0 / p1, 0.0);
    r.ar = (p0 - p1) / p1;
  } else if (p0 > 0.0) {
    r.pn = kNan;
    r.pn_defined = false;
    r.ar = kInf;
  } else {
    r.pn = 0.0;
    r.ar = 0.0;
  }
  r.rr = p0 > 0.0 ? p1 / p0 : (p1 > 0.0 ? kInf : 1.0);
  r.pns = std::max(p1 - p0, 0.0);
  r.ps = p1 < 1.0 ? std::max(1.0 - (1.0 - p0) / (1.0 - p1), 0.0) : 0.0;
  return r;
}

WorldFit fit_world(const WorldSample& sample, ModelTag tag, RngStream rng,
                   double threshold_q) {
  const Eigen::MatrixXd& x = sample.values;
  if (x.rows() < 2 || x.cols() < 1) throw InputError("fit_world: empty sample");
  WorldFit fit;
  fit.threshold_u = site_thresholds(x, threshold_q);
  fit.model.tag = tag;
  switch (tag) {
    case ModelTag::mgpd:
      fit.model.mgpd = mgpd_fit(make_exceedance_set(x, fit.threshold_u));
      break;
    case ModelTag::efcm:
      if (sample.coords.rows() != x.cols())
        throw InputError("fit_world: efcm needs d x 2 site coordinates");
      fit.model.efcm = efcm_fit(x, sample.coords, threshold_q, rng);
      break;
    case ModelTag::hw:
      if (sample.coords.rows() != x.cols())
        throw InputError("fit_world: hw needs d x 2 site coordinates");
      fit.model.hw = hw_fit(x, sample.coords, threshold_q);
      break;
    case ModelTag::empirical:
      break;
  }
  return fit;
}

TailProbEstimate estimate_p(const FittedModel& model, const WorldSample& sample,
                            const Eigen::VectorXd& w, const Eigen::VectorXd& u,
                            double v, long n_mc, RngStream rng) {
  const Eigen::MatrixXd& x = sample.values;
  if (w.size() != x.cols()) throw InputError("estimate_p: weight length");
  if (std::isnan(v)) throw InputError("estimate_p: v is NaN");
  if (v == -kInf) return {1.0, false};
  if (v == kInf) return {0.0, true};

  if (model.tag == ModelTag::empirical) {
    Eigen::VectorXd s = x * w;
    TailExtendedMargin dist({s.data(), s.data() + s.size()});
    return {dist.survival(v), false};
  }
  if (model.tag == ModelTag::mgpd)
    return {mgpd_tail_prob(model.mgpd, x, w, u, v), false};

  // Copula branch: simulate on the model scale, push to uniforms through the
  // model margin, then to the data scale through the tail-extended margins.
  const int d = static_cast<int>(x.cols());
  std::vector<TailExtendedMargin> margins;
  margins.reserve(d);
  for (int j = 0; j < d; ++j) margins.emplace_back(sorted_column(x, j));

  Eigen::MatrixXd sim =
      model.tag == ModelTag::efcm
          ? efcm_simulate(model.efcm, static_cast<int>(n_mc), rng)
          : hw_simulate(model.hw, static_cast<int>(n_mc), rng);
  std::vector<long> hits(worker_count(), 0);
  long chunk = (n_mc + worker_count() - 1) / worker_count();
  parallel_for(worker_count(), [&](long c) {
    long lo = c * chunk, hi = std::min(n_mc, (c + 1) * chunk);
    long h = 0;
    for (long i = lo; i < hi; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) {
        double pu = model.tag == ModelTag::efcm
                        ? efcm_marginal_cdf(sim(i, j), model.efcm.lambda)
                        : 1.0 - hw_marginal_survival(sim(i, j),
                                                     model.hw.dep_delta);
        pu = std::clamp(pu, 1e-12, 1.0 - 1e-12);
        s += w(j) * margins[j].quantile(pu);
      }
      if (s > v) ++h;
    }
    hits[c] = h;
  });
  long total = 0;
  for (long h : hits) total += h;
  double p = static_cast<double>(total) / static_cast<double>(n_mc);
  return {p, total == 0};
}

namespace {

struct WeightProblem {
  const WorldSample* factual;
  const WorldSample* counterfactual;
  const WorldFit* fit1;
  const WorldFit* fit0;
  WeightObjective objective;
  ReturnLevelSpec v_spec;
  RngStream rng;  // copied fresh per evaluation: common random numbers
  long n_mc;
  mutable long degenerate = 0, evaluations = 0;

  // Negated objective for the minimizer; +1e9 marks an invalid w.
  double operator()(const std::vector<double>& wv) const {
    ++evaluations;
    Eigen::VectorXd w =
        Eigen::Map<const Eigen::VectorXd>(wv.data(), wv.size());
    Eigen::VectorXd s0 = counterfactual->values * w;
    double v = return_level({s0.data(), s0.data() + s0.size()}, v_spec);
    double p0 = estimate_p(fit0->model, *counterfactual, w,
                           fit0->threshold_u, v, n_mc, rng)
                    .value;
    double p1 = estimate_p(fit1->model, *factual, w, fit1->threshold_u, v,
                           n_mc, rng)
                    .value;
    if (p1 <= 0.0) {
      ++degenerate;
      return 1e9;
    }
    AttributionReport m = causal_metrics(p0, p1);
    return objective == WeightObjective::pn ? -m.pn : -m.ar;
  }
};

WeightVector optimize_weights_impl(const WeightProblem& problem, int d) {
  if (d == 1) return WeightVector{Eigen::VectorXd::Ones(1)};
  std::vector<std::vector<double>> starts;
  starts.emplace_back(d, 1.0 / d);
  for (int k = 0; k < 4; ++k) {
    std::vector<double> w(d, 0.2 / d);
    w[k % d] += 0.8;
    double s = 0.0;
    for (double x : w) s += x;
    for (double& x : w) x /= s;
    starts.push_back(w);
  }
  std::vector<double> best;
  double best_val = kInf;
  for (const auto& w0 : starts) {
    OptimResult r = nelder_mead_simplex(
        [&](const std::vector<double>& w) { return problem(w); }, w0, 1e-6,
        400);
    if (r.objective_value < best_val) {
      best_val = r.objective_value;
      best = r.argmin;
    }
  }
  if (problem.degenerate == problem.evaluations)
    throw InputError("optimize_weights: p1 = 0 for every weight vector");
  if (best_val >= 1e9)  // every optimum invalid; fall back to uniform
    return make_weights(Eigen::VectorXd::Ones(d));
  return make_weights(Eigen::Map<const Eigen::VectorXd>(
      best.data(), static_cast<Eigen::Index>(best.size())));
}

}  // namespace

WeightVector optimize_weights(WeightObjective objective,
                              const WorldSample& factual,
                              const WorldSample& counterfactual, ModelTag tag,
                              const ReturnLevelSpec& v_spec, RngStream rng,
                              long n_mc) {
  if (factual.values.cols() != counterfactual.values.cols())
    throw InputError("optimize_weights: worlds must share sites");
  WorldFit fit1 = fit_world(factual, tag, rng.substream(101));
  WorldFit fit0 = fit_world(counterfactual, tag, rng.substream(102));
  WeightProblem problem{&factual, &counterfactual, &fit1,   &fit0,
                        objective, v_spec,          rng.substream(103), n_mc};
  return optimize_weights_impl(problem,
                               static_cast<int>(factual.values.cols()));
}

std::vector<int> bootstrap_indices(int n, BootstrapScheme scheme,
                                   int block_length, RngStream& rng) {
  if (n < 1) throw InputError("bootstrap_indices: empty sample");
  std::vector<int> idx;
  idx.reserve(n);
  if (scheme == BootstrapScheme::iid || block_length <= 1) {
    for (int i = 0; i < n; ++i)
      idx.push_back(static_cast<int>(rng.uniform() * n));
    return idx;
  }
  int len = std::min(block_length, n);
  while (static_cast<int>(idx.size()) < n) {
    int start = static_cast<int>(rng.uniform() * (n - len + 1));
    for (int k = 0; k < len && static_cast<int>(idx.size()) < n; ++k)
      idx.push_back(start + k);
  }
  return idx;
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m,
                          const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

// Type-7 percentile of the finite entries; NaN when none survive.
double finite_quantile(std::vector<double> v, double q) {
  v.erase(std::remove_if(v.begin(), v.end(),
                         [](double x) { return std::isnan(x); }),
          v.end());
  if (v.empty()) return kNan;
  std::sort(v.begin(), v.end());
  if (!std::isfinite(v.front()) || !std::isfinite(v.back())) {
    // Percentile on the extended reals: interpolation only between finite
    // neighbours; an infinite bracket propagates.
    double pos = q * (static_cast<double>(v.size()) - 1.0);
    std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= v.size()) return v.back();
    double f = pos - static_cast<double>(i);
    if (!std::isfinite(v[i]) || !std::isfinite(v[i + 1]))
      return f < 0.5 ? v[i] : v[i + 1];
    return v[i] + f * (v[i + 1] - v[i]);
  }
  return empirical_quantile_sorted(v, q);
}

}  // namespace

Interval bootstrap_ci(const PairStatistic& statistic,
                      const Eigen::MatrixXd& factual,
                      const Eigen::MatrixXd& counterfactual,
                      const BootstrapConfig& config, RngStream rng) {
  if (config.B < 200) throw InputError("bootstrap_ci: B must be >= 200");
  if (!(config.level > 0.0 && config.level < 1.0))
    throw InputError("bootstrap_ci: level must lie in (0,1)");
  std::vector<double> stats(config.B, kNan);
  std::vector<char> failed(config.B, 0);
  parallel_for(config.B, [&](long b) {
    RngStream r1 = rng.substream(static_cast<std::uint32_t>(2 * b + 1));
    RngStream r0 = rng.substream(static_cast<std::uint32_t>(2 * b + 2));
    try {
      std::vector<int> i1 =
          bootstrap_indices(static_cast<int>(factual.rows()), config.scheme,
                            config.block_length, r1);
      std::vector<int> i0 =
          bootstrap_indices(static_cast<int>(counterfactual.rows()),
                            config.scheme, config.block_length, r0);
      double s = statistic(take_rows(factual, i1), take_rows(counterfactual, i0));
      if (std::isnan(s)) throw NumericalError("statistic returned NaN");
      stats[b] = s;
    } catch (const std::exception&) {
      failed[b] = 1;
    }
  });
  long n_fail = std::count(failed.begin(), failed.end(), 1);
  if (n_fail * 10 > config.B)
    throw NumericalError("bootstrap_ci: statistic failed in " +
                             std::to_string(n_fail) + " of " +
                             std::to_string(config.B) + " replicates",
                         0.0);
  double a = (1.0 - config.level) / 2.0;
  return {finite_quantile(stats, a), finite_quantile(stats, 1.0 - a)};
}

AttributionReport attribute(const WorldSample& factual,
                            const WorldSample& counterfactual,
                            const AttributeConfig& config, RngStream rng) {
  if (factual.values.cols() != counterfactual.values.cols())
    throw InputError("attribute: worlds must share sites");
  if (!factual.site_ids.empty() && !counterfactual.site_ids.empty() &&
      factual.site_ids != counterfactual.site_ids)
    throw InputError("attribute: site id mismatch between worlds");
  const int d = static_cast<int>(factual.values.cols());

  WorldFit fit1, fit0;
  try {
    fit1 = fit_world(factual, config.model, rng.substream(1));
  } catch (const std::exception& e) {
    throw NumericalError(std::string("attribute[fit factual]: ") + e.what(),
                         0.0);
  }
  try {
    fit0 = fit_world(counterfactual, config.model, rng.substream(2));
  } catch (const std::exception& e) {
    throw NumericalError(std::string("attribute[fit counterfactual]: ") +
                             e.what(),
                         0.0);
  }

  WeightVector w;
  if (config.optimize) {
    WeightProblem problem{&factual,        &counterfactual,
                          &fit1,           &fit0,
                          config.objective, config.v_spec,
                          rng.substream(3), config.ci_n_mc};
    w = optimize_weights_impl(problem, d);
  } else {
    w = make_weights(config.fixed_w);
  }

  Eigen::VectorXd s0 = counterfactual.values * w.w;
  double v = return_level({s0.data(), s0.data() + s0.size()}, config.v_spec);

  double p0 = estimate_p(fit0.model, counterfactual, w.w, fit0.threshold_u, v,
                         config.n_mc, rng.substream(5))
                  .value;
  double p1 = estimate_p(fit1.model, factual, w.w, fit1.threshold_u, v,
                         config.n_mc, rng.substream(6))
                  .value;
  AttributionReport report = causal_metrics(p0, p1);
  report.weights = w;
  report.v = v;
  report.model_tag = config.model;

  // Bootstrap: resample rows within each world, keep the fitted dependence
  // models, the weights, and the event threshold fixed.
  const int B = config.ci.B;
  std::vector<double> b_p0(B, kNan), b_p1(B, kNan), b_pn(B, kNan),
      b_ps(B, kNan), b_pns(B, kNan), b_rr(B, kNan), b_ar(B, kNan);
  std::vector<char> failed(B, 0);
  RngStream boot = rng.substream(7);
  parallel_for(B, [&](long b) {
    RngStream r1 = boot.substream(static_cast<std::uint32_t>(3 * b + 1));
    RngStream r0 = boot.substream(static_cast<std::uint32_t>(3 * b + 2));
    RngStream rm = boot.substream(static_cast<std::uint32_t>(3 * b + 3));
    try {
      WorldSample f = factual, c = counterfactual;
      f.time_index.clear();
      c.time_index.clear();
      f.values = take_rows(factual.values,
                           bootstrap_indices(static_cast<int>(factual.values.rows()),
                                             config.ci.scheme,
                                             config.ci.block_length, r1));
      c.values = take_rows(
          counterfactual.values,
          bootstrap_indices(static_cast<int>(counterfactual.values.rows()),
                            config.ci.scheme, config.ci.block_length, r0));
      double q0 = estimate_p(fit0.model, c, w.w, fit0.threshold_u, v,
                             config.ci_n_mc, rm.substream(1))
                      .value;
      double q1 = estimate_p(fit1.model, f, w.w, fit1.threshold_u, v,
                             config.ci_n_mc, rm.substream(2))
                      .value;
      AttributionReport m = causal_metrics(q0, q1);
      b_p0[b] = m.p0;
      b_p1[b] = m.p1;
      b_pn[b] = m.pn;
      b_ps[b] = m.ps;
      b_pns[b] = m.pns;
      b_rr[b] = m.rr;
      b_ar[b] = m.ar;
    } catch (const std::exception&) {
      failed[b] = 1;
    }
  });
  long n_fail = std::count(failed.begin(), failed.end(), 1);
  if (n_fail * 10 > B)
    throw NumericalError("attribute[bootstrap]: statistic failed in " +
                             std::to_string(n_fail) + " replicates",
                         0.0);
  double a = (1.0 - config.ci.level) / 2.0;
  auto interval = [&](const std::vector<double>& s) {
    return Interval{finite_quantile(s, a), finite_quantile(s, 1.0 - a)};
  };
  report.ci["p0"] = interval(b_p0);
  report.ci["p1"] = interval(b_p1);
  report.ci["pn"] = interval(b_pn);
  report.ci["ps"] = interval(b_ps);
  report.ci["pns"] = interval(b_pns);
  report.ci["rr"] = interval(b_rr);
  report.ci["ar"] = interval(b_ar);
  return report;
}

}  // namespace tailattrib
