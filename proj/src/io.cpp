#include "tailattrib/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tailattrib/errors.hpp"

namespace tailattrib {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

// Days since 1970-01-01 of a proleptic Gregorian date.
long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  long era = (y >= 0 ? y : y - 399) / 400;
  long yoe = y - era * 400;
  long doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

// ISO date YYYY-MM-DD; month_out = 0 for plain numeric times.
bool parse_time(const std::string& s, double& t, int& month_out) {
  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    int y, m, d;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) == 3 && m >= 1 &&
        m <= 12 && d >= 1 && d <= 31) {
      t = static_cast<double>(days_from_civil(y, m, d));
      month_out = m;
      return true;
    }
  }
  month_out = 0;
  return parse_number(s, t);
}

struct LongRow {
  double t = 0.0;
  int month = 0;
  std::string site;
  double value = 0.0;
};

std::vector<LongRow> read_long_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("ingest: cannot open " + path);
  std::vector<LongRow> rows;
  std::vector<std::string> bad;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (lineno == 1 && t.rfind("time", 0) == 0) continue;
    std::vector<std::string> f = split_csv_line(t);
    if (f.size() != 3)
      throw InputError("ingest: " + path + " line " + std::to_string(lineno) +
                       ": expected time,site_id,value");
    LongRow r;
    r.site = f[1];
    if (!parse_time(f[0], r.t, r.month))
      throw InputError("ingest: " + path + " line " + std::to_string(lineno) +
                       ": bad time stamp '" + f[0] + "'");
    if (!parse_number(f[2], r.value)) {
      if (bad.size() < 10)
        bad.push_back("(time=" + f[0] + ", site=" + f[1] + ")");
      continue;
    }
    rows.push_back(r);
  }
  if (!bad.empty()) {
    std::string msg = "ingest: " + path + ": missing or bad values at";
    for (const std::string& c : bad) msg += " " + c;
    throw InputError(msg);
  }
  return rows;
}

WorldSample pivot_world(const std::string& path, WorldTag world,
                        const std::vector<std::string>& site_ids,
                        const DatasetManifest& manifest) {
  std::vector<LongRow> rows = read_long_csv(path);
  std::map<std::string, int> site_col;
  for (std::size_t j = 0; j < site_ids.size(); ++j)
    site_col[site_ids[j]] = static_cast<int>(j);

  if (!manifest.months.empty()) {
    std::set<int> keep(manifest.months.begin(), manifest.months.end());
    std::vector<LongRow> kept;
    for (const LongRow& r : rows) {
      if (r.month == 0)
        throw InputError(
            "ingest: month filter requires ISO date time stamps in " + path);
      if (keep.count(r.month)) kept.push_back(r);
    }
    rows = std::move(kept);
  }

  std::map<double, std::vector<std::pair<bool, double>>> grid;
  for (const LongRow& r : rows) {
    auto it = site_col.find(r.site);
    if (it == site_col.end())
      throw InputError("ingest: " + path + ": site '" + r.site +
                       "' is not in the site table");
    auto& slot = grid.try_emplace(r.t, site_ids.size(), std::pair(false, 0.0))
                     .first->second;
    if (slot[it->second].first)
      throw InputError("ingest: " + path + ": duplicate entry (time=" +
                       fmt_g17(r.t) + ", site=" + r.site + ")");
    slot[it->second] = {true, r.value};
  }
  if (grid.empty()) throw InputError("ingest: " + path + ": no data rows");

  std::vector<std::string> missing;
  for (const auto& [t, slot] : grid)
    for (std::size_t j = 0; j < slot.size(); ++j)
      if (!slot[j].first && missing.size() < 10)
        missing.push_back("(time=" + fmt_g17(t) + ", site=" + site_ids[j] +
                          ")");
  if (!missing.empty()) {
    std::string msg = "ingest: " + path + ": missing values at";
    for (const std::string& c : missing) msg += " " + c;
    throw InputError(msg);
  }

  WorldSample s;
  s.world = world;
  s.site_ids = site_ids;
  s.values.resize(static_cast<long>(grid.size()),
                  static_cast<long>(site_ids.size()));
  long i = 0;
  for (const auto& [t, slot] : grid) {
    s.time_index.push_back(t);
    for (std::size_t j = 0; j < slot.size(); ++j)
      s.values(i, static_cast<long>(j)) = slot[j].second;
    ++i;
  }

  if (manifest.k_day_maxima > 1) {
    const int k = manifest.k_day_maxima;
    long blocks = s.values.rows() / k;  // trailing partial block is dropped
    if (blocks < 1)
      throw InputError("ingest: " + path + ": fewer rows than one " +
                       std::to_string(k) + "-day block");
    Eigen::MatrixXd agg(blocks, s.values.cols());
    std::vector<double> t_agg(blocks);
    for (long b = 0; b < blocks; ++b) {
      agg.row(b) = s.values.middleRows(b * k, k).colwise().maxCoeff();
      t_agg[b] = s.time_index[b * k + k - 1];
    }
    s.values = std::move(agg);
    s.time_index = std::move(t_agg);
  }
  return s;
}

std::string json_number(double x) {
  if (std::isnan(x)) return "\"nan\"";
  if (std::isinf(x)) return x > 0 ? "\"inf\"" : "\"-inf\"";
  return fmt_g17(x);
}

const char* model_tag_name(ModelTag tag) {
  switch (tag) {
    case ModelTag::mgpd: return "mgpd";
    case ModelTag::efcm: return "efcm";
    case ModelTag::hw: return "hw";
    case ModelTag::empirical: return "empirical";
  }
  return "empirical";
}

}  // namespace

IngestResult ingest(const DatasetManifest& manifest) {
  std::ifstream in(manifest.site_file);
  if (!in) throw InputError("ingest: cannot open " + manifest.site_file);
  IngestResult r;
  std::vector<std::array<double, 2>> coords;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (lineno == 1 && t.rfind("site_id", 0) == 0) continue;
    std::vector<std::string> f = split_csv_line(t);
    double lat, lon;
    if (f.size() != 3 || !parse_number(f[1], lat) || !parse_number(f[2], lon))
      throw InputError("ingest: " + manifest.site_file + " line " +
                       std::to_string(lineno) + ": expected site_id,lat,lon");
    if (std::find(r.site_ids.begin(), r.site_ids.end(), f[0]) !=
        r.site_ids.end())
      throw InputError("ingest: duplicate site id '" + f[0] + "'");
    r.site_ids.push_back(f[0]);
    coords.push_back({lat, lon});
  }
  if (r.site_ids.empty())
    throw InputError("ingest: empty site table " + manifest.site_file);
  r.coords.resize(static_cast<long>(coords.size()), 2);
  for (std::size_t j = 0; j < coords.size(); ++j) {
    r.coords(static_cast<long>(j), 0) = coords[j][0];
    r.coords(static_cast<long>(j), 1) = coords[j][1];
  }

  r.factual = pivot_world(manifest.factual_path, WorldTag::factual, r.site_ids,
                          manifest);
  r.counterfactual = pivot_world(manifest.counterfactual_path,
                                 WorldTag::counterfactual, r.site_ids,
                                 manifest);
  r.factual.coords = r.coords;
  r.counterfactual.coords = r.coords;
  return r;
}

void write_long_csv(const std::string& path, const WorldSample& sample) {
  if (static_cast<long>(sample.site_ids.size()) != sample.values.cols())
    throw InputError("write_long_csv: sample has no site ids");
  std::ofstream out(path);
  if (!out) throw InputError("write_long_csv: cannot open " + path);
  out << "time,site_id,value\n";
  for (long i = 0; i < sample.values.rows(); ++i) {
    double t = i < static_cast<long>(sample.time_index.size())
                   ? sample.time_index[i]
                   : static_cast<double>(i);
    for (long j = 0; j < sample.values.cols(); ++j)
      out << fmt_g17(t) << ',' << sample.site_ids[j] << ','
          << fmt_g17(sample.values(i, j)) << '\n';
  }
}

void write_site_csv(const std::string& path,
                    const std::vector<std::string>& site_ids,
                    const Eigen::MatrixXd& coords) {
  if (coords.rows() != static_cast<long>(site_ids.size()) || coords.cols() != 2)
    throw InputError("write_site_csv: coords must be d x 2");
  std::ofstream out(path);
  if (!out) throw InputError("write_site_csv: cannot open " + path);
  out << "site_id,lat,lon\n";
  for (std::size_t j = 0; j < site_ids.size(); ++j)
    out << site_ids[j] << ',' << fmt_g17(coords(static_cast<long>(j), 0))
        << ',' << fmt_g17(coords(static_cast<long>(j), 1)) << '\n';
}

std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string attribution_report_json(const AttributionReport& report) {
  std::string s = "{\n";
  s += "  \"model\": \"" + std::string(model_tag_name(report.model_tag)) +
       "\",\n";
  s += "  \"p0\": " + json_number(report.p0) + ",\n";
  s += "  \"p1\": " + json_number(report.p1) + ",\n";
  s += "  \"pn\": " + json_number(report.pn) + ",\n";
  s += "  \"pn_defined\": " + std::string(report.pn_defined ? "true" : "false") +
       ",\n";
  s += "  \"ps\": " + json_number(report.ps) + ",\n";
  s += "  \"pns\": " + json_number(report.pns) + ",\n";
  s += "  \"rr\": " + json_number(report.rr) + ",\n";
  s += "  \"ar\": " + json_number(report.ar) + ",\n";
  s += "  \"v\": " + json_number(report.v) + ",\n";
  s += "  \"weights\": [";
  for (long j = 0; j < report.weights.w.size(); ++j)
    s += (j ? ", " : "") + json_number(report.weights.w(j));
  s += "],\n  \"ci\": {";
  bool first = true;
  for (const auto& [key, interval] : report.ci) {
    s += (first ? "\n" : ",\n");
    s += "    \"" + key + "\": {\"lower\": " + json_number(interval.lower) +
         ", \"upper\": " + json_number(interval.upper) + "}";
    first = false;
  }
  s += "\n  }\n}\n";
  return s;
}

std::string chi_curves_csv(const std::vector<ChiCurve>& curves) {
  if (curves.empty()) throw InputError("chi_curves_csv: no curves");
  const std::vector<double>& grid = curves.front().u_grid;
  std::string s = "u";
  for (const ChiCurve& c : curves) {
    if (c.u_grid != grid)
      throw InputError("chi_curves_csv: curves must share one u grid");
    s += "," + c.source;
    if (!c.lower.empty()) s += "," + c.source + "_lo," + c.source + "_hi";
  }
  s += "\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    s += fmt_g17(grid[k]);
    for (const ChiCurve& c : curves) {
      s += "," + fmt_g17(c.values[k]);
      if (!c.lower.empty())
        s += "," + fmt_g17(c.lower[k]) + "," + fmt_g17(c.upper[k]);
    }
    s += "\n";
  }
  return s;
}

std::string cluster_csv(const std::vector<ClusterAssignment>& clusters,
                        const std::vector<std::string>& site_ids) {
  std::string s =
      "centroid_lat,centroid_lon,d0,singleton,hw_H,ad_p,member_sites\n";
  for (const ClusterAssignment& c : clusters) {
    s += fmt_g17(c.centroid(0)) + "," + fmt_g17(c.centroid(1)) + "," +
         std::to_string(c.d0) + "," + (c.singleton ? "1" : "0") + "," +
         fmt_g17(c.hw_H) + "," + fmt_g17(c.ad_p) + ",";
    for (std::size_t m = 0; m < c.member_sites.size(); ++m) {
      int j = c.member_sites[m];
      s += (m ? ";" : "");
      s += j >= 0 && j < static_cast<int>(site_ids.size())
               ? site_ids[j]
               : std::to_string(j);
    }
    s += "\n";
  }
  return s;
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string run_metadata_json(std::uint64_t seed,
                              const std::string& config_text) {
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a_hash(config_text)));
  return "{\n  \"version\": \"1.0.0\",\n  \"seed\": " + std::to_string(seed) +
         ",\n  \"config_hash\": \"" + hash + "\"\n}\n";
}

}  // namespace tailattrib
