#include "tailattrib/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tailattrib/attribution.hpp"
#include "tailattrib/efcm.hpp"
#include "tailattrib/errors.hpp"
#include "tailattrib/hw.hpp"
#include "tailattrib/mgpd.hpp"
#include "tailattrib/parallel.hpp"
#include "tailattrib/univariate.hpp"

namespace tailattrib {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_config(const ScenarioConfig& c) {
  if (c.n < 100) throw InputError("scenario: n must be at least 100");
  if (c.d < 2) throw InputError("scenario: d must be at least 2");
  if (c.mc_reps < 1) throw InputError("scenario: mc_reps must be positive");
  if (c.m_sim < 100) throw InputError("scenario: m_sim must be at least 100");
  if (c.oracle_draws < 10000)
    throw InputError("scenario: oracle_draws must be at least 10000");
  if (c.p_targets.empty()) throw InputError("scenario: empty p_targets");
  for (double p : c.p_targets)
    if (!(p > 0.0 && p < 1.0))
      throw InputError("scenario: p_targets must lie in (0,1)");
  if (!(c.range > 0.0) || !(c.site_distance > 0.0))
    throw InputError("scenario: range and site_distance must be positive");
}

Eigen::MatrixXd site_layout(int d, double spacing) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, 2);
  for (int j = 0; j < d; ++j) c(j, 1) = j * spacing;
  return c;
}

// nu_p targets: empirical (1-p)-quantiles of w . X under the truth, from a
// dedicated large oracle sample so target noise stays out of the bias tables.
std::vector<double> oracle_targets(const HwModel& truth,
                                   const Eigen::VectorXd& w,
                                   const std::vector<double>& p_targets,
                                   long draws, RngStream root) {
  std::vector<double> s;
  s.reserve(draws);
  long chunk = 1000000;
  long n_chunks = (draws + chunk - 1) / chunk;
  for (long c = 0; c < n_chunks; ++c) {
    long m = std::min(chunk, draws - c * chunk);
    Eigen::MatrixXd x = hw_simulate(truth, static_cast<int>(m),
                                    root.substream(static_cast<std::uint32_t>(c)));
    Eigen::VectorXd proj = x * w;
    s.insert(s.end(), proj.data(), proj.data() + m);
  }
  std::sort(s.begin(), s.end());
  std::vector<double> nu(p_targets.size());
  for (std::size_t k = 0; k < p_targets.size(); ++k)
    nu[k] = empirical_quantile_sorted(s, 1.0 - p_targets[k]);
  return nu;
}

// Fraction of simulated rows whose back-transformed weighted sum exceeds each
// target; the model-scale draws pass through the model margin to uniforms and
// through the given data margins back to the evaluation scale.
std::vector<double> exceed_fractions(const Eigen::MatrixXd& sim,
                                     double dep_delta,
                                     const std::vector<TailExtendedMargin>& mg,
                                     const Eigen::VectorXd& w,
                                     const std::vector<double>& nu) {
  std::vector<long> hits(nu.size(), 0);
  const int d = static_cast<int>(sim.cols());
  for (long i = 0; i < sim.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      double pu = 1.0 - hw_marginal_survival(sim(i, j), dep_delta);
      pu = std::clamp(pu, 1e-12, 1.0 - 1e-12);
      s += w(j) * mg[j].quantile(pu);
    }
    for (std::size_t k = 0; k < nu.size(); ++k)
      if (s > nu[k]) ++hits[k];
  }
  std::vector<double> f(nu.size());
  for (std::size_t k = 0; k < nu.size(); ++k)
    f[k] = static_cast<double>(hits[k]) / static_cast<double>(sim.rows());
  return f;
}

std::vector<double> exceed_fractions_direct(const Eigen::MatrixXd& sim,
                                            const Eigen::VectorXd& w,
                                            const std::vector<double>& nu) {
  Eigen::VectorXd proj = sim * w;
  std::vector<double> f(nu.size());
  for (std::size_t k = 0; k < nu.size(); ++k)
    f[k] = static_cast<double>((proj.array() > nu[k]).count()) /
           static_cast<double>(sim.rows());
  return f;
}

void finalize_cell(CellResult& cell) {
  double sum = 0.0, sum2 = 0.0;
  long m = 0;
  cell.n_fail = 0;
  for (double ph : cell.p_hat) {
    if (std::isnan(ph)) {
      ++cell.n_fail;
      continue;
    }
    double e = ph - cell.p;
    sum += e;
    sum2 += e * e;
    ++m;
  }
  if (m == 0) {
    cell.bias = cell.variance = cell.rmse = kNan;
    return;
  }
  cell.bias = sum / m;
  cell.rmse = std::sqrt(sum2 / m);
  double mean = cell.bias;
  double var = 0.0;
  for (double ph : cell.p_hat)
    if (!std::isnan(ph)) var += (ph - cell.p - mean) * (ph - cell.p - mean);
  cell.variance = var / m;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

ScenarioResult run_scenario1(const ScenarioConfig& config) {
  check_config(config);
  std::vector<double> deltas =
      config.delta_list.empty() ? std::vector<double>{0.3, 0.7}
                                : config.delta_list;
  const int nd = static_cast<int>(deltas.size());
  const int np = static_cast<int>(config.p_targets.size());
  Eigen::MatrixXd coords = site_layout(config.d, config.site_distance);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(config.d, 1.0 / config.d);
  RngStream base(config.seed);

  std::vector<HwModel> truths;
  std::vector<std::vector<double>> nu(nd);
  for (int di = 0; di < nd; ++di) {
    truths.push_back(make_hw_model_gaussian(deltas[di], config.range, coords));
    nu[di] = oracle_targets(truths[di], w, config.p_targets,
                            config.oracle_draws,
                            base.substream(0x70000000u + di));
  }

  struct RepOut {
    std::vector<double> p11, p12;
  };
  std::vector<RepOut> out(nd * config.mc_reps);
  parallel_for(nd * config.mc_reps, [&](long t) {
    int di = static_cast<int>(t / config.mc_reps);
    RngStream r = base.substream(static_cast<std::uint32_t>(1 + t));
    Eigen::MatrixXd x = hw_simulate(truths[di], config.n, r.substream(0));
    RepOut& o = out[t];
    o.p11.assign(np, kNan);
    o.p12.assign(np, kNan);

    // Sub 1.1: treat the Pareto data as exponential, i.e. distort every
    // margin by x -> e^x (exponent clamped so the matrix stays finite; the
    // rank-based fit only sees the ordering). The dependence is held at the
    // truth, so only delta is estimated.
    try {
      Eigen::MatrixXd xe =
          x.array().min(690.0).exp();  // e^690 is still representable
      HwFitOptions opt;
      opt.family = HwCopulaFamily::gaussian;
      opt.rank_margins = true;
      opt.fix_dependence = true;
      opt.fixed_range = config.range;
      opt.profile = false;
      HwModel fit = hw_fit(xe, coords, 0.9, opt);
      // The fit lives on the distorted scale, so evaluate on the original
      // scale by back-ranking through the distorted data's margins and
      // inverting the distortion by log; equivalently, use the margins of
      // log(xe), whose tail extension is fitted on the stable scale.
      std::vector<TailExtendedMargin> mg;
      for (int j = 0; j < config.d; ++j) {
        Eigen::VectorXd lj = xe.col(j).array().log();
        mg.emplace_back(std::vector<double>(lj.data(), lj.data() + config.n));
      }
      Eigen::MatrixXd sim =
          hw_simulate(fit, static_cast<int>(config.m_sim), r.substream(1));
      o.p11 = exceed_fractions(sim, fit.dep_delta, mg, w, nu[di]);
    } catch (const NumericalError&) {
    } catch (const InputError&) {
    }

    // Sub 1.2: correct standard margins taken parametrically, wrong working
    // dependence family (inverted extreme-value logistic).
    try {
      HwFitOptions opt;
      opt.family = HwCopulaFamily::ievl;
      opt.rank_margins = true;
      opt.profile = false;
      HwModel fit = hw_fit(x, coords, 0.9, opt);
      Eigen::MatrixXd sim =
          hw_simulate(fit, static_cast<int>(config.m_sim), r.substream(2));
      o.p12 = exceed_fractions_direct(sim, w, nu[di]);
    } catch (const NumericalError&) {
    } catch (const InputError&) {
    }
  });

  ScenarioResult result;
  result.scenario = 1;
  for (int di = 0; di < nd; ++di)
    for (int sub = 0; sub < 2; ++sub)
      for (int k = 0; k < np; ++k) {
        CellResult cell;
        cell.sub = sub == 0 ? "1.1" : "1.2";
        cell.model = sub == 0 ? "hw-gauss" : "hw-ievl";
        cell.delta = deltas[di];
        cell.p = config.p_targets[k];
        cell.nu_p = nu[di][k];
        for (int rep = 0; rep < config.mc_reps; ++rep) {
          const RepOut& o = out[di * config.mc_reps + rep];
          cell.p_hat.push_back(sub == 0 ? o.p11[k] : o.p12[k]);
        }
        finalize_cell(cell);
        result.cells.push_back(cell);
      }
  result.metadata =
      "targets: nu_p from a dedicated oracle sample of the true model "
      "(oracle_draws rows per delta); sub 1.1 estimates are evaluated on the "
      "original scale after back-ranking through the distorted margins and "
      "inverting the distortion, with the GPD tail extension fitted on the "
      "log scale";
  return result;
}

ScenarioResult run_scenario2(const ScenarioConfig& config) {
  check_config(config);
  std::vector<double> deltas =
      config.delta_list.empty()
          ? std::vector<double>{0.3, 0.4, 0.6, 0.7, 0.8}
          : config.delta_list;
  const int nd = static_cast<int>(deltas.size());
  const int np = static_cast<int>(config.p_targets.size());
  const int n_curve = std::min(20, config.mc_reps);
  Eigen::MatrixXd coords = site_layout(config.d, config.site_distance);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(config.d, 1.0 / config.d);
  RngStream base(config.seed);

  std::vector<HwModel> truths;
  std::vector<std::vector<double>> nu(nd);
  for (int di = 0; di < nd; ++di) {
    truths.push_back(make_hw_model_gaussian(deltas[di], config.range, coords));
    nu[di] = oracle_targets(truths[di], w, config.p_targets,
                            config.oracle_draws,
                            base.substream(0x70000000u + di));
  }

  struct RepOut {
    std::vector<double> p_mgpd, p_efcm;
    double mgpd_chi_flat = kNan;       // closed-form limiting chi of the fit
    double efcm_lambda = kNan, efcm_rho = kNan;
  };
  std::vector<RepOut> out(nd * config.mc_reps);
  parallel_for(nd * config.mc_reps, [&](long t) {
    int di = static_cast<int>(t / config.mc_reps);
    RngStream r = base.substream(static_cast<std::uint32_t>(1 + t));
    Eigen::MatrixXd x = hw_simulate(truths[di], config.n, r.substream(0));
    RepOut& o = out[t];
    o.p_mgpd.assign(np, kNan);
    o.p_efcm.assign(np, kNan);

    WorldSample ws;
    ws.values = x;
    ws.coords = coords;
    Eigen::VectorXd u(config.d);
    for (int j = 0; j < config.d; ++j) {
      std::vector<double> col(x.col(j).data(), x.col(j).data() + config.n);
      u(j) = empirical_quantile(col, 0.9);
    }

    try {
      FittedModel fm;
      fm.tag = ModelTag::mgpd;
      fm.mgpd = mgpd_fit(make_exceedance_set(x, u));
      for (int k = 0; k < np; ++k)
        o.p_mgpd[k] =
            estimate_p(fm, ws, w, u, nu[di][k], config.m_sim, r.substream(1))
                .value;
      o.mgpd_chi_flat = mgpd_chi(fm.mgpd.alpha(0), fm.mgpd.alpha(1));
    } catch (const NumericalError&) {
    } catch (const InputError&) {
    }

    // The eFCM is a dependence model only; scoring it against the targets
    // goes through the known true margins, so the comparison isolates the
    // copula fit from marginal estimation noise.
    try {
      EfcmModel fit = efcm_fit(x, coords, 0.9, r.substream(2));
      Eigen::MatrixXd sim =
          efcm_simulate(fit, static_cast<int>(config.m_sim), r.substream(3));
      std::vector<long> hits(np, 0);
      for (long i = 0; i < sim.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < config.d; ++j) {
          double pu = std::clamp(efcm_marginal_cdf(sim(i, j), fit.lambda),
                                 1e-12, 1.0 - 1e-12);
          s += w(j) * hw_marginal_quantile(pu, truths[di].dep_delta);
        }
        for (int k = 0; k < np; ++k)
          if (s > nu[di][k]) ++hits[k];
      }
      for (int k = 0; k < np; ++k)
        o.p_efcm[k] = static_cast<double>(hits[k]) /
                      static_cast<double>(sim.rows());
      o.efcm_lambda = fit.lambda;
      o.efcm_rho = fit.corr(0, 1);
    } catch (const NumericalError&) {
    } catch (const InputError&) {
    }
  });

  ScenarioResult result;
  result.scenario = 2;
  for (int di = 0; di < nd; ++di)
    for (int model = 0; model < 2; ++model)
      for (int k = 0; k < np; ++k) {
        CellResult cell;
        cell.sub = "2";
        cell.model = model == 0 ? "mgpd" : "efcm";
        cell.delta = deltas[di];
        cell.p = config.p_targets[k];
        cell.nu_p = nu[di][k];
        for (int rep = 0; rep < config.mc_reps; ++rep) {
          const RepOut& o = out[di * config.mc_reps + rep];
          cell.p_hat.push_back(model == 0 ? o.p_mgpd[k] : o.p_efcm[k]);
        }
        finalize_cell(cell);
        result.cells.push_back(cell);
      }

  // Finite-level chi curves: truth by quadrature, fitted models averaged over
  // the first n_curve replicates (mGPD's curve is its limiting constant).
  std::vector<double> grid{0.5,  0.55, 0.6,  0.65, 0.7,  0.75, 0.8, 0.85,
                           0.9,  0.95, 0.96, 0.97, 0.98, 0.99, 0.995};
  for (int di = 0; di < nd; ++di) {
    ChiCurveRecord truth{deltas[di], "truth", grid, {}};
    for (double uu : grid) truth.chi.push_back(hw_chi_u(truths[di], uu));
    result.chi_curves.push_back(truth);

    ChiCurveRecord mg{deltas[di], "mgpd", grid, {}};
    ChiCurveRecord ef{deltas[di], "efcm", grid, {}};
    for (double uu : grid) {
      double sm = 0.0, se = 0.0;
      int cm = 0, ce = 0;
      for (int rep = 0; rep < n_curve; ++rep) {
        const RepOut& o = out[di * config.mc_reps + rep];
        if (!std::isnan(o.mgpd_chi_flat)) {
          sm += o.mgpd_chi_flat;
          ++cm;
        }
        if (!std::isnan(o.efcm_lambda)) {
          se += efcm_chi_u(o.efcm_lambda, o.efcm_rho, uu);
          ++ce;
        }
      }
      mg.chi.push_back(cm ? sm / cm : kNan);
      ef.chi.push_back(ce ? se / ce : kNan);
    }
    result.chi_curves.push_back(mg);
    result.chi_curves.push_back(ef);
  }
  result.metadata =
      "targets: nu_p from a dedicated oracle sample of the true model "
      "(oracle_draws rows per delta); copula-model estimates back-ranked "
      "through tail-extended empirical margins; chi curves average the first "
      "min(20, mc_reps) replicate fits";
  return result;
}

std::string scenario_csv(const ScenarioResult& result) {
  std::string s = "scenario,sub,model,delta,p,replicate,p_hat,bias\n";
  for (const CellResult& cell : result.cells)
    for (std::size_t rep = 0; rep < cell.p_hat.size(); ++rep) {
      double ph = cell.p_hat[rep];
      s += std::to_string(result.scenario) + "," + cell.sub + "," +
           cell.model + "," + fmt17(cell.delta) + "," + fmt17(cell.p) + "," +
           std::to_string(rep) + "," + fmt17(ph) + "," + fmt17(ph - cell.p) +
           "\n";
    }
  return s;
}

std::string chi_csv(const ScenarioResult& result) {
  std::string s = "delta,model,u,chi\n";
  for (const ChiCurveRecord& c : result.chi_curves)
    for (std::size_t k = 0; k < c.u.size(); ++k)
      s += fmt17(c.delta) + "," + c.model + "," + fmt17(c.u[k]) + "," +
           fmt17(c.chi[k]) + "\n";
  return s;
}

}  // namespace tailattrib
