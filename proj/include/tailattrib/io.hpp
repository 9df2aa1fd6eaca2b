#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tailattrib/attribution.hpp"
#include "tailattrib/dependence.hpp"
#include "tailattrib/regions.hpp"

namespace tailattrib {

// Long-format inputs: per-world CSV (time, site_id, value) plus a shared
// site table (site_id, lat, lon). Time stamps are ISO dates (YYYY-MM-DD) or
// plain numbers; month filtering requires dates.
struct DatasetManifest {
  std::string factual_path;
  std::string counterfactual_path;
  std::string site_file;
  int k_day_maxima = 1;     // 1 disables block-maxima aggregation
  std::vector<int> months;  // keep these months only; empty keeps all
};

struct IngestResult {
  WorldSample factual;
  WorldSample counterfactual;
  Eigen::MatrixXd coords;  // d x 2 (lat, lon), site-table order
  std::vector<std::string> site_ids;
};

IngestResult ingest(const DatasetManifest& manifest);

// Writers matching the ingest format, for round trips and bundled data.
void write_long_csv(const std::string& path, const WorldSample& sample);
void write_site_csv(const std::string& path,
                    const std::vector<std::string>& site_ids,
                    const Eigen::MatrixXd& coords);

// 17-significant-digit decimal form; round-trips doubles bit-exactly.
std::string fmt_g17(double x);

std::string attribution_report_json(const AttributionReport& report);

// Aligned curve table: u column plus one value column per curve source,
// with <source>_lo / <source>_hi columns when a curve carries bands.
std::string chi_curves_csv(const std::vector<ChiCurve>& curves);

std::string cluster_csv(const std::vector<ClusterAssignment>& clusters,
                        const std::vector<std::string>& site_ids);

std::uint64_t fnv1a_hash(const std::string& text);

// Run provenance: seed, config hash, library version.
std::string run_metadata_json(std::uint64_t seed,
                              const std::string& config_text);

}  // namespace tailattrib
