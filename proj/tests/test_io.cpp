#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "tailattrib/errors.hpp"
#include "tailattrib/io.hpp"

using namespace tailattrib;

namespace {

std::string tmp_path(const char* name) {
  return std::string("/tmp/tailattrib_io_") + name;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

DatasetManifest two_site_manifest(const std::string& fac,
                                  const std::string& cf) {
  DatasetManifest m;
  m.factual_path = tmp_path("f.csv");
  m.counterfactual_path = tmp_path("c.csv");
  m.site_file = tmp_path("sites.csv");
  write_file(m.site_file, "site_id,lat,lon\nA,48.0,2.0\nB,49.0,3.0\n");
  write_file(m.factual_path, fac);
  write_file(m.counterfactual_path, cf);
  return m;
}

}  // namespace

TEST_CASE("ingest pivots, aligns shuffled sites, and reads coords") {
  // Site columns arrive in different orders across the worlds.
  DatasetManifest m = two_site_manifest(
      "time,site_id,value\n1,A,1.5\n1,B,2.5\n2,B,3.5\n2,A,0.5\n",
      "time,site_id,value\n1,B,20\n2,B,30\n1,A,10\n2,A,40\n");
  IngestResult r = ingest(m);
  CHECK(r.site_ids == std::vector<std::string>{"A", "B"});
  CHECK(r.coords(0, 0) == 48.0);
  CHECK(r.coords(1, 1) == 3.0);
  REQUIRE(r.factual.values.rows() == 2);
  CHECK(r.factual.values(0, 0) == 1.5);
  CHECK(r.factual.values(0, 1) == 2.5);
  CHECK(r.factual.values(1, 0) == 0.5);
  CHECK(r.counterfactual.values(1, 0) == 40.0);
  CHECK(r.counterfactual.values(0, 1) == 20.0);
  CHECK(r.factual.time_index == std::vector<double>{1.0, 2.0});
  CHECK(r.factual.world == WorldTag::factual);
  CHECK(r.counterfactual.world == WorldTag::counterfactual);
  CHECK(r.factual.coords.rows() == 2);
}

TEST_CASE("k-day maxima aggregation: 14 daily rows become 2") {
  std::string fac = "time,site_id,value\n";
  std::string cf = "time,site_id,value\n";
  for (int day = 1; day <= 14; ++day)
    for (const char* s : {"A", "B"}) {
      fac += std::to_string(day) + "," + s + "," + std::to_string(day) + "\n";
      cf += std::to_string(day) + "," + s + ",1\n";
    }
  DatasetManifest m = two_site_manifest(fac, cf);
  m.k_day_maxima = 7;
  IngestResult r = ingest(m);
  REQUIRE(r.factual.values.rows() == 2);
  CHECK(r.factual.values(0, 0) == 7.0);   // max of days 1..7
  CHECK(r.factual.values(1, 0) == 14.0);  // max of days 8..14
  CHECK(r.factual.time_index == std::vector<double>{7.0, 14.0});
}

TEST_CASE("month filter keeps winter rows and requires dates") {
  DatasetManifest m = two_site_manifest(
      "time,site_id,value\n2000-01-10,A,1\n2000-01-10,B,2\n"
      "2000-06-10,A,3\n2000-06-10,B,4\n2000-12-05,A,5\n2000-12-05,B,6\n",
      "time,site_id,value\n2000-01-10,A,1\n2000-01-10,B,1\n"
      "2000-12-05,A,1\n2000-12-05,B,1\n");
  m.months = {12, 1, 2};
  IngestResult r = ingest(m);
  CHECK(r.factual.values.rows() == 2);  // June dropped
  CHECK(r.factual.values(1, 1) == 6.0);
  // Dates arrive as day serials, strictly increasing.
  CHECK(r.factual.time_index[0] < r.factual.time_index[1]);

  DatasetManifest bad = two_site_manifest(
      "time,site_id,value\n1,A,1\n1,B,2\n", "time,site_id,value\n1,A,1\n1,B,2\n");
  bad.months = {1};
  CHECK_THROWS_AS(ingest(bad), InputError);
}

TEST_CASE("missing values and unknown sites are reported with cells") {
  DatasetManifest m = two_site_manifest(
      "time,site_id,value\n1,A,1\n1,B,\n2,A,3\n2,B,4\n",
      "time,site_id,value\n1,A,1\n1,B,2\n");
  CHECK_THROWS_WITH_AS(ingest(m), doctest::Contains("site=B"), InputError);

  DatasetManifest gap = two_site_manifest(
      "time,site_id,value\n1,A,1\n1,B,2\n2,A,3\n",
      "time,site_id,value\n1,A,1\n1,B,2\n");
  CHECK_THROWS_WITH_AS(ingest(gap), doctest::Contains("time=2"), InputError);

  DatasetManifest dup = two_site_manifest(
      "time,site_id,value\n1,A,1\n1,A,2\n1,B,2\n",
      "time,site_id,value\n1,A,1\n1,B,2\n");
  CHECK_THROWS_WITH_AS(ingest(dup), doctest::Contains("duplicate"), InputError);

  DatasetManifest alien = two_site_manifest(
      "time,site_id,value\n1,A,1\n1,Z,2\n", "time,site_id,value\n1,A,1\n");
  CHECK_THROWS_WITH_AS(ingest(alien), doctest::Contains("'Z'"), InputError);
}

TEST_CASE("synthetic round trip through write and ingest") {
  WorldSample s;
  s.values.resize(3, 2);
  s.values << 0.1234567890123456789, 2.0, -3.5, 4.75, 1e-17, 6.25;
  s.site_ids = {"A", "B"};
  s.time_index = {1.0, 2.0, 3.0};
  Eigen::MatrixXd coords(2, 2);
  coords << 48.0, 2.0, 49.0, 3.0;

  write_long_csv(tmp_path("rt_f.csv"), s);
  write_long_csv(tmp_path("rt_c.csv"), s);
  write_site_csv(tmp_path("rt_sites.csv"), s.site_ids, coords);
  DatasetManifest m;
  m.factual_path = tmp_path("rt_f.csv");
  m.counterfactual_path = tmp_path("rt_c.csv");
  m.site_file = tmp_path("rt_sites.csv");
  IngestResult r = ingest(m);
  CHECK(r.factual.values == s.values);  // bit-exact through %.17g
  CHECK(r.coords == coords);
  CHECK(r.factual.time_index == s.time_index);
}

TEST_CASE("fmt_g17 round-trips doubles bit-exactly") {
  for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -1.7976931348623157e308,
                   5e-324, 0.0}) {
    // strtod, not stod: stod raises out_of_range on subnormals.
    CHECK(std::strtod(fmt_g17(x).c_str(), nullptr) == x);
  }
}

TEST_CASE("attribution report serializes to valid json") {
  AttributionReport rep = causal_metrics(0.01, 0.02);
  rep.model_tag = ModelTag::efcm;
  rep.v = 12.5;
  rep.weights.w = Eigen::Vector2d(0.25, 0.75);
  rep.ci["pn"] = {0.1, 0.9};
  rep.ci["ar"] = {-0.8, -0.2};
  nlohmann::json j = nlohmann::json::parse(attribution_report_json(rep));
  CHECK(j["model"] == "efcm");
  CHECK(j["p0"].get<double>() == 0.01);
  CHECK(j["pn"].get<double>() == 0.5);
  CHECK(j["rr"].get<double>() == 2.0);
  CHECK(j["pn_defined"] == true);
  CHECK(j["weights"].size() == 2);
  CHECK(j["ci"]["pn"]["upper"].get<double>() == 0.9);

  // Non-finite metrics stay representable.
  AttributionReport inf_rep = causal_metrics(0.01, 0.0);
  nlohmann::json ji = nlohmann::json::parse(attribution_report_json(inf_rep));
  CHECK(ji["ar"] == "inf");
  CHECK(ji["pn"] == "nan");
  CHECK(ji["pn_defined"] == false);
}

TEST_CASE("chi curve table aligns sources and bands") {
  ChiCurve a{{0.5, 0.9}, {0.4, 0.2}, {0.3, 0.1}, {0.5, 0.3}, "empirical"};
  ChiCurve b{{0.5, 0.9}, {0.45, 0.25}, {}, {}, "efcm"};
  std::string csv = chi_curves_csv({a, b});
  CHECK(csv.rfind("u,empirical,empirical_lo,empirical_hi,efcm\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  ChiCurve c{{0.5, 0.95}, {0.4, 0.2}, {}, {}, "hw"};
  CHECK_THROWS_AS(chi_curves_csv({a, c}), InputError);
  CHECK_THROWS_AS(chi_curves_csv({}), InputError);
}

TEST_CASE("run metadata carries a stable config hash") {
  std::string m1 = run_metadata_json(7, "{\"a\":1}");
  std::string m2 = run_metadata_json(7, "{\"a\":1}");
  std::string m3 = run_metadata_json(7, "{\"a\":2}");
  CHECK(m1 == m2);
  CHECK(m1 != m3);
  nlohmann::json j = nlohmann::json::parse(m1);
  CHECK(j["seed"] == 7);
  CHECK(j["config_hash"].get<std::string>().size() == 16);
  CHECK(fnv1a_hash("") == 14695981039346656037ULL);
}
