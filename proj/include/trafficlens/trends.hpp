#pragma once

#include <map>
#include <string>
#include <vector>

#include "trafficlens/common.hpp"
#include "trafficlens/csv.hpp"
#include "trafficlens/gridio.hpp"
#include "trafficlens/stats/pca.hpp"

namespace trafficlens::trends {

struct TrendsPrepResult {
  std::vector<std::string> kept_terms;
  std::vector<std::string> dropped_terms;  // all-zero ("sparse") terms
  stats::PcaResult pca;
  std::vector<std::string> regions;
  std::map<ZoneId, std::vector<double>> zone_scores;  // region scores broadcast to member zones
};

/// Drops sparse terms, runs a correlation-matrix PCA over regions and maps
/// region scores onto zones.
inline TrendsPrepResult prepare_trends(const TrendsTable& trends, std::size_t k = 3) {
  if (trends.regions.size() < 2) throw InputError("trends: need at least 2 regions");
  TrendsPrepResult res;
  std::vector<std::size_t> kept;
  for (std::size_t t = 0; t < trends.terms.size(); ++t) {
    if (trends.is_sparse(t)) {
      res.dropped_terms.push_back(trends.terms[t]);
    } else {
      res.kept_terms.push_back(trends.terms[t]);
      kept.push_back(t);
    }
  }
  if (kept.size() < 2) throw InputError("trends: need at least 2 non-sparse terms");
  if (k > kept.size())
    throw InputError("trends: " + std::to_string(k) + " components requested but only " +
                     std::to_string(kept.size()) + " non-sparse terms");
  stats::Matrix m(trends.regions.size(), kept.size());
  for (std::size_t r = 0; r < trends.regions.size(); ++r)
    for (std::size_t c = 0; c < kept.size(); ++c) m(r, c) = trends.at(r, kept[c]);
  res.pca = stats::pca(m, k, /*standardize=*/true, res.kept_terms);
  res.regions = trends.regions;

  std::map<std::string, std::size_t> region_row;
  for (std::size_t r = 0; r < trends.regions.size(); ++r) region_row[trends.regions[r]] = r;
  for (const auto& [region, zone] : trends.region_zones) {
    auto row = res.pca.scores.row(region_row.at(region));
    auto [it, inserted] = res.zone_scores.emplace(zone, std::vector<double>(row.begin(), row.end()));
    if (!inserted && it->second != std::vector<double>(row.begin(), row.end()))
      throw InputError("trends: zone '" + zone + "' is mapped to more than one region");
  }
  return res;
}

inline std::string component_name(std::size_t i) { return "PC" + std::to_string(i + 1); }

inline csv::Writer zone_scores_csv(const TrendsPrepResult& res) {
  std::vector<std::string> header{"zone_id"};
  for (std::size_t i = 0; i < res.pca.explained_variance.size(); ++i) header.push_back(component_name(i));
  csv::Writer w(header);
  for (const auto& [zone, scores] : res.zone_scores) {
    std::vector<std::string> row{zone};
    for (double s : scores) row.push_back(format_double(s));
    w.row(row);
  }
  return w;
}

inline csv::Writer loadings_csv(const TrendsPrepResult& res) {
  std::vector<std::string> header{"term"};
  for (std::size_t i = 0; i < res.pca.loadings.cols(); ++i) header.push_back(component_name(i));
  csv::Writer w(header);
  for (std::size_t t = 0; t < res.kept_terms.size(); ++t) {
    std::vector<std::string> row{res.kept_terms[t]};
    for (std::size_t c = 0; c < res.pca.loadings.cols(); ++c) row.push_back(format_double(res.pca.loadings(t, c)));
    w.row(row);
  }
  return w;
}

inline csv::Writer explained_csv(const TrendsPrepResult& res) {
  csv::Writer w({"component", "eigenvalue", "explained_ratio"});
  for (std::size_t i = 0; i < res.pca.explained_variance.size(); ++i)
    w.row({component_name(i), format_double(res.pca.explained_variance[i]), format_double(res.pca.explained_ratio[i])});
  return w;
}

}  // namespace trafficlens::trends
