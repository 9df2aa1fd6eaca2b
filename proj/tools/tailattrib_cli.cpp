#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tailattrib/errors.hpp"
#include "tailattrib/io.hpp"
#include "tailattrib/simharness.hpp"

using namespace tailattrib;
using nlohmann::json;

namespace {

struct CliError {
  std::string stage;
  std::string message;
};

ModelTag parse_model(const std::string& name) {
  if (name == "mgpd") return ModelTag::mgpd;
  if (name == "efcm") return ModelTag::efcm;
  if (name == "hw") return ModelTag::hw;
  if (name == "empirical") return ModelTag::empirical;
  throw CliError{"config", "unknown model '" + name + "'"};
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string f;
  while (std::getline(ss, f, sep)) out.push_back(f);
  return out;
}

// Data-source options shared by the subcommands that read world files.
struct DataOpts {
  std::string factual, counterfactual, sites;
  int kday = 1;
  std::string months;

  void add_flags(CLI::App* cmd, bool need_counterfactual) {
    cmd->add_option("--factual", factual, "factual world long CSV")
        ->required();
    auto* c = cmd->add_option("--counterfactual", counterfactual,
                              "counterfactual world long CSV");
    if (need_counterfactual) c->required();
    cmd->add_option("--sites", sites, "site table CSV (site_id,lat,lon)")
        ->required();
    cmd->add_option("--kday", kday, "k-day block maxima (1 = off)");
    cmd->add_option("--months", months, "comma-separated months to keep");
  }

  IngestResult load() const {
    DatasetManifest m;
    m.factual_path = factual;
    m.counterfactual_path =
        counterfactual.empty() ? factual : counterfactual;
    m.site_file = sites;
    m.k_day_maxima = kday;
    for (const std::string& t : split(months, ','))
      if (!t.empty()) m.months.push_back(std::stoi(t));
    try {
      return ingest(m);
    } catch (const InputError& e) {
      throw CliError{"ingest", e.what()};
    }
  }
};

void write_text(const std::string& dir, const std::string& name,
                const std::string& text) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/" + name);
  if (!out) throw CliError{"write", "cannot open " + dir + "/" + name};
  out << text;
}

json fit_json(const FittedModel& model) {
  json j;
  switch (model.tag) {
    case ModelTag::mgpd: {
      j["model"] = "mgpd";
      j["gamma"] = model.mgpd.gamma;
      j["neg_log_lik"] = model.mgpd.neg_log_lik;
      for (long k = 0; k < model.mgpd.alpha.size(); ++k) {
        j["alpha"].push_back(model.mgpd.alpha(k));
        j["beta"].push_back(model.mgpd.beta(k));
        j["sigma"].push_back(model.mgpd.sigma(k));
      }
      break;
    }
    case ModelTag::efcm:
      j["model"] = "efcm";
      j["lambda"] = model.efcm.lambda;
      j["range_delta"] = model.efcm.range_delta;
      j["lambda_at_bound"] = model.efcm.lambda_at_bound;
      j["neg_log_lik"] = model.efcm.neg_log_lik;
      break;
    case ModelTag::hw:
      j["model"] = "hw";
      j["dep_delta"] = model.hw.dep_delta;
      j["family"] =
          model.hw.w_copula == HwCopulaFamily::gaussian ? "gaussian" : "ievl";
      if (model.hw.w_copula == HwCopulaFamily::gaussian)
        j["range"] = model.hw.range;
      else
        j["ievl_alpha"] = model.hw.ievl_alpha;
      j["neg_log_lik"] = model.hw.neg_log_lik;
      break;
    case ModelTag::empirical:
      j["model"] = "empirical";
      break;
  }
  return j;
}

int column_of(const IngestResult& data, const std::string& site) {
  for (std::size_t j = 0; j < data.site_ids.size(); ++j)
    if (data.site_ids[j] == site) return static_cast<int>(j);
  throw CliError{"config", "site '" + site + "' is not in the site table"};
}

ScenarioConfig scenario_config(const std::string& preset, int mc_reps, int n,
                               long m_sim, long oracle_draws,
                               std::uint64_t seed) {
  ScenarioConfig c;
  if (preset == "tiny") {
    c.n = 400;
    c.mc_reps = 4;
    c.m_sim = 4000;
    c.oracle_draws = 200000;
  } else if (preset != "desk") {
    throw CliError{"config", "unknown preset '" + preset + "'"};
  }
  if (mc_reps > 0) c.mc_reps = mc_reps;
  if (n > 0) c.n = n;
  if (m_sim > 0) c.m_sim = m_sim;
  if (oracle_draws > 0) c.oracle_draws = oracle_draws;
  c.seed = seed;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tail dependence modeling and extreme event attribution"};
  app.require_subcommand(1);

  std::string out_dir = ".";
  std::uint64_t seed = 1;
  std::string config_path;
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "rng seed")->capture_default_str();
  app.add_option("--config", config_path,
                 "JSON config file; flags override its values");

  // fit ----------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "fit a dependence model");
  DataOpts fit_data;
  fit_data.add_flags(fit_cmd, false);
  std::string fit_model = "efcm", fit_world_name = "factual";
  double threshold_q = 0.9;
  fit_cmd->add_option("--model", fit_model, "mgpd|efcm|hw");
  fit_cmd->add_option("--world", fit_world_name, "factual|counterfactual");
  fit_cmd->add_option("--threshold-q", threshold_q, "censoring quantile");

  // chi ----------------------------------------------------------------
  auto* chi_cmd = app.add_subcommand("chi", "chi(u) curves for a site pair");
  DataOpts chi_data;
  chi_data.add_flags(chi_cmd, false);
  std::string chi_pair, chi_models = "empirical";
  int chi_B = 0;
  double chi_level = 0.95;
  chi_cmd->add_option("--pair", chi_pair, "two site ids, e.g. A,B")
      ->required();
  chi_cmd->add_option("--models", chi_models,
                      "comma list of empirical,mgpd,efcm,hw");
  chi_cmd->add_option("--bootstrap-B", chi_B, "bands for the empirical curve");
  chi_cmd->add_option("--level", chi_level, "band level");

  // cluster ------------------------------------------------------------
  auto* cl_cmd = app.add_subcommand("cluster", "grow homogeneous clusters");
  DataOpts cl_data;
  cl_data.add_flags(cl_cmd, true);
  std::string cl_centroid, cl_box;
  double cl_spacing = 1.0;
  int cl_d0max = 8;
  ClusterCriteria cl_crit;
  cl_cmd->add_option("--centroid", cl_centroid, "single centroid lat,lon");
  cl_cmd->add_option("--grid", cl_box,
                     "bounding box latmin,latmax,lonmin,lonmax");
  cl_cmd->add_option("--spacing", cl_spacing, "grid spacing in degrees");
  cl_cmd->add_option("--d0max", cl_d0max, "maximum cluster size");
  cl_cmd->add_option("--hmax", cl_crit.H_max, "Hosking-Wallis H cutoff");
  cl_cmd->add_option("--adalpha", cl_crit.ad_alpha, "Anderson-Darling level");

  // attribute ----------------------------------------------------------
  auto* at_cmd = app.add_subcommand("attribute", "causal attribution report");
  DataOpts at_data;
  at_data.add_flags(at_cmd, true);
  std::string at_model = "empirical", at_objective = "PN", at_scheme = "iid";
  std::string at_weights;
  AttributeConfig at_cfg;
  double return_years = 5.0;
  at_cmd->add_option("--model", at_model, "mgpd|efcm|hw|empirical");
  at_cmd->add_option("--objective", at_objective, "PN|AR");
  at_cmd->add_option("--return-years", return_years,
                     "counterfactual return level defining the event");
  at_cmd->add_option("--B", at_cfg.ci.B, "bootstrap replicates");
  at_cmd->add_option("--block-length", at_cfg.ci.block_length,
                     "block bootstrap length");
  at_cmd->add_option("--scheme", at_scheme, "iid|block");
  at_cmd->add_option("--level", at_cfg.ci.level, "interval level");
  at_cmd->add_option("--n-mc", at_cfg.n_mc, "Monte Carlo draws");
  at_cmd->add_option("--fixed-weights", at_weights,
                     "comma list; disables weight optimization");

  // simulate -----------------------------------------------------------
  std::string sim_preset = "desk";
  int sim_reps = 0, sim_n = 0;
  long sim_m = 0, sim_oracle = 0;
  auto* s1_cmd = app.add_subcommand("simulate1", "misspecification study");
  auto* s2_cmd = app.add_subcommand("simulate2", "mgpd vs efcm study");
  for (CLI::App* c : {s1_cmd, s2_cmd}) {
    c->add_option("--preset", sim_preset, "desk|tiny");
    c->add_option("--mc-reps", sim_reps, "replicates");
    c->add_option("--n", sim_n, "sample size per replicate");
    c->add_option("--m-sim", sim_m, "fitted-model simulation size");
    c->add_option("--oracle-draws", sim_oracle, "target oracle sample size");
  }

  // returnlevel --------------------------------------------------------
  auto* rl_cmd = app.add_subcommand("returnlevel", "projected return level");
  DataOpts rl_data;
  rl_data.add_flags(rl_cmd, false);
  std::string rl_weights, rl_world = "factual";
  double rl_years = 5.0, rl_blocks = 52.0;
  rl_cmd->add_option("--weights", rl_weights, "comma list of site weights");
  rl_cmd->add_option("--years", rl_years, "return period in years");
  rl_cmd->add_option("--blocks-per-year", rl_blocks, "observations per year");
  rl_cmd->add_option("--world", rl_world, "factual|counterfactual");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  // Config file values fill in flags the user did not pass.
  std::string config_text = "{}";
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw CliError{"config", "cannot open " + config_path};
      std::stringstream ss;
      ss << in.rdbuf();
      config_text = ss.str();
      json cfg = json::parse(config_text, nullptr, false);
      if (cfg.is_discarded())
        throw CliError{"config", "invalid JSON in " + config_path};
      auto maybe = [&](const char* key, auto& slot, const CLI::Option* opt) {
        if (cfg.contains(key) && opt->count() == 0)
          slot = cfg[key].get<std::decay_t<decltype(slot)>>();
      };
      maybe("seed", seed, app.get_option("--seed"));
      maybe("out", out_dir, app.get_option("--out"));
      if (app.got_subcommand(at_cmd)) {
        maybe("model", at_model, at_cmd->get_option("--model"));
        maybe("objective", at_objective, at_cmd->get_option("--objective"));
        maybe("return_years", return_years,
              at_cmd->get_option("--return-years"));
        maybe("B", at_cfg.ci.B, at_cmd->get_option("--B"));
      }
      if (app.got_subcommand(fit_cmd))
        maybe("model", fit_model, fit_cmd->get_option("--model"));
      if (app.got_subcommand(s1_cmd) || app.got_subcommand(s2_cmd)) {
        CLI::App* sc = app.got_subcommand(s1_cmd) ? s1_cmd : s2_cmd;
        maybe("preset", sim_preset, sc->get_option("--preset"));
        maybe("mc_reps", sim_reps, sc->get_option("--mc-reps"));
        maybe("n", sim_n, sc->get_option("--n"));
        maybe("m_sim", sim_m, sc->get_option("--m-sim"));
        maybe("oracle_draws", sim_oracle, sc->get_option("--oracle-draws"));
      }
    }

    json effective;
    effective["seed"] = seed;

    if (app.got_subcommand(fit_cmd)) {
      IngestResult data = fit_data.load();
      const WorldSample& w =
          fit_world_name == "counterfactual" ? data.counterfactual
                                             : data.factual;
      effective["command"] = "fit";
      effective["model"] = fit_model;
      try {
        WorldFit fit =
            fit_world(w, parse_model(fit_model), RngStream(seed), threshold_q);
        json j = fit_json(fit.model);
        for (long k = 0; k < fit.threshold_u.size(); ++k)
          j["threshold_u"].push_back(fit.threshold_u(k));
        write_text(out_dir, "fit.json", j.dump(2) + "\n");
      } catch (const std::exception& e) {
        throw CliError{"fit", e.what()};
      }
    } else if (app.got_subcommand(chi_cmd)) {
      IngestResult data = chi_data.load();
      std::vector<std::string> pair = split(chi_pair, ',');
      if (pair.size() != 2)
        throw CliError{"config", "--pair needs exactly two site ids"};
      int c0 = column_of(data, pair[0]), c1 = column_of(data, pair[1]);
      const Eigen::MatrixXd& xm = data.factual.values;
      std::vector<double> x(xm.col(c0).data(), xm.col(c0).data() + xm.rows());
      std::vector<double> y(xm.col(c1).data(), xm.col(c1).data() + xm.rows());
      Eigen::MatrixXd pair_x(xm.rows(), 2);
      pair_x << xm.col(c0), xm.col(c1);
      Eigen::MatrixXd pair_coords(2, 2);
      pair_coords << data.coords.row(c0), data.coords.row(c1);
      WorldSample pair_world;
      pair_world.values = pair_x;
      pair_world.coords = pair_coords;

      effective["command"] = "chi";
      effective["pair"] = chi_pair;
      effective["models"] = chi_models;
      // Keep only levels the empirical estimator can resolve (>= 5 tail
      // points), so every requested curve shares one grid.
      std::vector<double> grid;
      for (double u : default_u_grid())
        if ((1.0 - u) * static_cast<double>(xm.rows()) >= 5.0)
          grid.push_back(u);
      if (grid.empty())
        throw CliError{"chi", "too few rows for any chi(u) level"};
      std::vector<ChiCurve> curves;
      for (const std::string& name : split(chi_models, ',')) {
        try {
          if (name == "empirical") {
            curves.push_back(empirical_chi_curve(x, y, grid, chi_B, chi_level,
                                                 RngStream(seed, 101)));
          } else {
            WorldFit fit = fit_world(pair_world, parse_model(name),
                                     RngStream(seed, 102));
            FittedModel m = fit.model;
            auto chi_fun = [m](double u) -> double {
              switch (m.tag) {
                case ModelTag::mgpd:
                  return mgpd_chi(m.mgpd.alpha(0), m.mgpd.alpha(1));
                case ModelTag::efcm:
                  return efcm_chi_u(m.efcm.lambda, m.efcm.corr(0, 1), u);
                default:
                  return hw_chi_u(m.hw, u);
              }
            };
            curves.push_back(model_chi_curve(chi_fun, grid, name));
          }
        } catch (const std::exception& e) {
          throw CliError{"chi[" + name + "]", e.what()};
        }
      }
      write_text(out_dir, "chi.csv", chi_curves_csv(curves));
    } else if (app.got_subcommand(cl_cmd)) {
      IngestResult data = cl_data.load();
      std::vector<Eigen::Vector2d> centroids;
      if (!cl_centroid.empty()) {
        std::vector<std::string> f = split(cl_centroid, ',');
        if (f.size() != 2)
          throw CliError{"config", "--centroid needs lat,lon"};
        centroids.emplace_back(std::stod(f[0]), std::stod(f[1]));
      } else if (!cl_box.empty()) {
        std::vector<std::string> f = split(cl_box, ',');
        if (f.size() != 4)
          throw CliError{"config", "--grid needs latmin,latmax,lonmin,lonmax"};
        BoundingBox box{std::stod(f[0]), std::stod(f[1]), std::stod(f[2]),
                        std::stod(f[3])};
        Eigen::MatrixXd g = build_grid(box, cl_spacing);
        for (long i = 0; i < g.rows(); ++i)
          centroids.emplace_back(g(i, 0), g(i, 1));
      } else {
        throw CliError{"config", "cluster needs --centroid or --grid"};
      }
      effective["command"] = "cluster";
      effective["centroids"] = centroids.size();
      std::vector<ClusterAssignment> clusters;
      try {
        for (std::size_t c = 0; c < centroids.size(); ++c)
          clusters.push_back(grow_cluster(
              centroids[c], data.coords, data.factual, data.counterfactual,
              std::min<int>(cl_d0max, static_cast<int>(data.site_ids.size())),
              cl_crit, RngStream(seed, static_cast<std::uint32_t>(200 + c))));
      } catch (const std::exception& e) {
        throw CliError{"cluster", e.what()};
      }
      write_text(out_dir, "clusters.csv",
                 cluster_csv(clusters, data.site_ids));
    } else if (app.got_subcommand(at_cmd)) {
      IngestResult data = at_data.load();
      at_cfg.model = parse_model(at_model);
      if (at_objective == "PN")
        at_cfg.objective = WeightObjective::pn;
      else if (at_objective == "AR")
        at_cfg.objective = WeightObjective::ar;
      else
        throw CliError{"config", "objective must be PN or AR"};
      at_cfg.ci.scheme =
          at_scheme == "block" ? BootstrapScheme::block : BootstrapScheme::iid;
      at_cfg.v_spec.years = return_years;
      if (!at_weights.empty()) {
        std::vector<std::string> f = split(at_weights, ',');
        Eigen::VectorXd w(f.size());
        for (std::size_t k = 0; k < f.size(); ++k) w(k) = std::stod(f[k]);
        at_cfg.fixed_w = w;
        at_cfg.optimize = false;
      }
      effective["command"] = "attribute";
      effective["model"] = at_model;
      effective["objective"] = at_objective;
      effective["return_years"] = return_years;
      try {
        AttributionReport rep = attribute(data.factual, data.counterfactual,
                                          at_cfg, RngStream(seed, 300));
        write_text(out_dir, "attribution.json",
                   attribution_report_json(rep));
      } catch (const NumericalError& e) {
        throw CliError{"attribute", e.what()};
      } catch (const InputError& e) {
        throw CliError{"attribute", e.what()};
      }
    } else if (app.got_subcommand(s1_cmd) || app.got_subcommand(s2_cmd)) {
      bool one = app.got_subcommand(s1_cmd);
      ScenarioConfig cfg = scenario_config(sim_preset, sim_reps, sim_n, sim_m,
                                           sim_oracle, seed);
      effective["command"] = one ? "simulate1" : "simulate2";
      effective["preset"] = sim_preset;
      effective["n"] = cfg.n;
      effective["mc_reps"] = cfg.mc_reps;
      effective["m_sim"] = cfg.m_sim;
      effective["oracle_draws"] = cfg.oracle_draws;
      try {
        ScenarioResult r = one ? run_scenario1(cfg) : run_scenario2(cfg);
        std::string stem = one ? "scenario1" : "scenario2";
        write_text(out_dir, stem + ".csv", scenario_csv(r));
        if (!one) write_text(out_dir, stem + "_chi.csv", chi_csv(r));
        write_text(out_dir, stem + "_metadata.txt", r.metadata + "\n");
      } catch (const std::exception& e) {
        throw CliError{one ? "simulate1" : "simulate2", e.what()};
      }
    } else if (app.got_subcommand(rl_cmd)) {
      IngestResult data = rl_data.load();
      const WorldSample& w =
          rl_world == "counterfactual" ? data.counterfactual : data.factual;
      Eigen::VectorXd wv =
          Eigen::VectorXd::Constant(w.values.cols(),
                                    1.0 / static_cast<double>(w.values.cols()));
      if (!rl_weights.empty()) {
        std::vector<std::string> f = split(rl_weights, ',');
        if (static_cast<long>(f.size()) != w.values.cols())
          throw CliError{"config", "--weights length must match site count"};
        for (std::size_t k = 0; k < f.size(); ++k) wv(k) = std::stod(f[k]);
      }
      effective["command"] = "returnlevel";
      effective["years"] = rl_years;
      try {
        Eigen::VectorXd proj = w.values * make_weights(wv).w;
        ReturnLevelSpec spec{rl_years, rl_blocks};
        double v = return_level({proj.data(), proj.data() + proj.size()}, spec);
        json j;
        j["return_years"] = rl_years;
        j["blocks_per_year"] = rl_blocks;
        j["level"] = v;
        write_text(out_dir, "returnlevel.json", j.dump(2) + "\n");
        std::cout << fmt_g17(v) << "\n";
      } catch (const std::exception& e) {
        throw CliError{"returnlevel", e.what()};
      }
    }

    write_text(out_dir, "run_metadata.json",
               run_metadata_json(seed, effective.dump() + config_text));
  } catch (const CliError& e) {
    std::cerr << "error[" << e.stage << "]: " << e.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[main]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
