#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tailattrib/efcm.hpp"
#include "tailattrib/hw.hpp"
#include "tailattrib/mgpd.hpp"
#include "tailattrib/rng.hpp"
#include "tailattrib/univariate.hpp"

namespace tailattrib {

enum class WorldTag { counterfactual = 0, factual = 1 };

// One climate world's aligned site series (rows = time, columns = sites).
struct WorldSample {
  Eigen::MatrixXd values;
  WorldTag world = WorldTag::factual;
  std::vector<std::string> site_ids;   // optional, size d when present
  std::vector<double> time_index;      // optional, size n when present
  Eigen::MatrixXd coords;              // d x 2; required for efcm/hw fits
};

// Nonnegative site weights on the unit simplex.
struct WeightVector {
  Eigen::VectorXd w;
};

// Validates nonnegativity and normalizes to sum 1.
WeightVector make_weights(const Eigen::VectorXd& raw);

enum class ModelTag { mgpd, efcm, hw, empirical };

// Empirical distribution of one series with a GPD tail fitted above the
// tail_q empirical quantile, so quantiles beyond the sample maximum resolve.
class TailExtendedMargin {
 public:
  explicit TailExtendedMargin(std::vector<double> sample, double tail_q = 0.9);
  double quantile(double u) const;
  double survival(double v) const;
  bool has_tail() const { return has_tail_; }

 private:
  std::vector<double> sorted_;
  double tail_q_ = 0.9;
  double t_ = 0.0;
  GpdParams gpd_;
  bool has_tail_ = false;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct AttributionReport {
  double p0 = 0.0, p1 = 0.0;
  double pn = 0.0, ps = 0.0, pns = 0.0;
  double rr = 1.0;  // +inf when p0 = 0 < p1
  double ar = 0.0;  // +inf when p1 = 0 < p0
  bool pn_defined = true;
  std::map<std::string, Interval> ci;
  WeightVector weights;
  double v = 0.0;
  ModelTag model_tag = ModelTag::empirical;
};

// Fills the five causal metrics from the tail probabilities of the
// counterfactual (p0) and factual (p1) worlds.
AttributionReport causal_metrics(double p0, double p1);

// Dependence model fitted to one world, dispatched on the tag.
struct FittedModel {
  ModelTag tag = ModelTag::empirical;
  MgpdModel mgpd;
  EfcmModel efcm;
  HwModel hw;
};

// Per-world fit artifacts: the dependence model and the per-site 90th
// percentile thresholds.
struct WorldFit {
  FittedModel model;
  Eigen::VectorXd threshold_u;
};

WorldFit fit_world(const WorldSample& sample, ModelTag tag, RngStream rng,
                   double threshold_q = 0.9);

struct TailProbEstimate {
  double value = 0.0;
  bool resolution_warning = false;  // no MC exceedance at the requested v
};

// P(w . X > v) in the given world. mgpd delegates to mgpd_tail_prob; efcm/hw
// simulate n_mc rows and back-transform to the data scale through empirical
// margins with a GPD tail extension; empirical uses the projected series
// itself with the same tail extension.
TailProbEstimate estimate_p(const FittedModel& model, const WorldSample& sample,
                            const Eigen::VectorXd& w, const Eigen::VectorXd& u,
                            double v, long n_mc, RngStream rng);

enum class WeightObjective { pn, ar };

// Maximizes PN or AR over the unit simplex; v is recomputed per w as the
// counterfactual return level of w . X.
WeightVector optimize_weights(WeightObjective objective,
                              const WorldSample& factual,
                              const WorldSample& counterfactual, ModelTag tag,
                              const ReturnLevelSpec& v_spec, RngStream rng,
                              long n_mc = 20000);

enum class BootstrapScheme { iid, block };

struct BootstrapConfig {
  BootstrapScheme scheme = BootstrapScheme::iid;
  int block_length = 13;  // time steps; three months of weekly maxima
  int B = 300;
  double level = 0.90;
};

// Row indices of one bootstrap resample (block_length <= 1 means iid).
std::vector<int> bootstrap_indices(int n, BootstrapScheme scheme,
                                   int block_length, RngStream& rng);

using PairStatistic =
    std::function<double(const Eigen::MatrixXd&, const Eigen::MatrixXd&)>;

// Percentile interval of the statistic over B resamples; the two worlds are
// resampled independently.
Interval bootstrap_ci(const PairStatistic& statistic,
                      const Eigen::MatrixXd& factual,
                      const Eigen::MatrixXd& counterfactual,
                      const BootstrapConfig& config, RngStream rng);

struct AttributeConfig {
  ModelTag model = ModelTag::empirical;
  ReturnLevelSpec v_spec;
  WeightObjective objective = WeightObjective::pn;
  BootstrapConfig ci;
  long n_mc = 100000;     // point-estimate Monte Carlo draws
  long ci_n_mc = 20000;   // per-bootstrap-replicate Monte Carlo draws
  bool optimize = true;   // false: use fixed_w as given
  Eigen::VectorXd fixed_w;
};

// Full pipeline: thresholds, independent per-world fits, weight choice,
// p0/p1 estimation, metrics, and bootstrap confidence intervals.
AttributionReport attribute(const WorldSample& factual,
                            const WorldSample& counterfactual,
                            const AttributeConfig& config, RngStream rng);

}  // namespace tailattrib
