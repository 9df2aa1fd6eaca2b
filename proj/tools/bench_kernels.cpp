#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "tailattrib/attribution.hpp"
#include "tailattrib/hw.hpp"
#include "tailattrib/parallel.hpp"

using namespace tailattrib;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct BenchResult {
  std::string name;
  double serial_s = 0.0;
  double parallel_s = 0.0;
};

// Runs fn twice: once capped to one worker via TAILATTRIB_THREADS, once with
// the OpenMP default. worker_count() re-reads the environment on every call,
// so flipping the variable between runs is enough.
template <class F>
BenchResult bench(const std::string& name, F&& fn) {
  BenchResult r;
  r.name = name;
  setenv("TAILATTRIB_THREADS", "1", 1);
  clock_type::time_point t0 = clock_type::now();
  fn();
  r.serial_s = seconds_since(t0);
  unsetenv("TAILATTRIB_THREADS");
  t0 = clock_type::now();
  fn();
  r.parallel_s = seconds_since(t0);
  return r;
}

WorldSample synthetic_world(int n, int d, std::uint64_t seed) {
  WorldSample w;
  w.values.resize(n, d);
  w.coords.resize(d, 2);
  for (int j = 0; j < d; ++j) {
    w.coords(j, 0) = 0.0;
    w.coords(j, 1) = 0.5 * j;
  }
  HwModel truth = make_hw_model_gaussian(0.5, 0.8, w.coords);
  w.values = hw_simulate(truth, n, RngStream(seed));
  return w;
}

}  // namespace

int main() {
  const int n = 2000, d = 3;
  WorldSample fac = synthetic_world(n, d, 11);
  WorldSample cf = synthetic_world(n, d, 12);

  RngStream rng(1);
  WorldFit efcm_fit_res = fit_world(fac, ModelTag::efcm, rng.substream(1));
  Eigen::VectorXd w = Eigen::VectorXd::Constant(d, 1.0 / d);
  Eigen::VectorXd u(d);
  for (int j = 0; j < d; ++j) {
    std::vector<double> col(fac.values.col(j).data(),
                            fac.values.col(j).data() + n);
    u(j) = empirical_quantile(col, 0.9);
  }
  Eigen::VectorXd proj = fac.values * w;
  double v = empirical_quantile({proj.data(), proj.data() + n}, 0.995);

  std::vector<BenchResult> results;
  results.push_back(bench("estimate_p efcm (1e6 draws)", [&] {
    estimate_p(efcm_fit_res.model, fac, w, u, v, 1000000, RngStream(1, 5));
  }));
  results.push_back(bench("bootstrap_ci B=200", [&] {
    PairStatistic stat = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
      return a.col(0).maxCoeff() - b.col(0).maxCoeff();
    };
    BootstrapConfig cfg;
    cfg.B = 200;
    bootstrap_ci(stat, fac.values, cf.values, cfg, RngStream(1, 6));
  }));
  results.push_back(bench("fit_world efcm x 8", [&] {
    parallel_for(8, [&](long i) {
      fit_world(fac, ModelTag::efcm,
                RngStream(2, static_cast<std::uint32_t>(i)));
    });
  }));

  std::printf("%-32s %10s %10s %8s\n", "kernel", "serial_s", "parallel_s",
              "speedup");
  for (const BenchResult& r : results)
    std::printf("%-32s %10.3f %10.3f %8.2f\n", r.name.c_str(), r.serial_s,
                r.parallel_s, r.serial_s / r.parallel_s);
  return 0;
}
