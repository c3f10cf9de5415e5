#pragma once

// Analyses behind the CLI subcommands: correlation validation against ground
// truth, paired regressions, weekly heatmaps and GeoJSON export.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trafficlens/common.hpp"
#include "trafficlens/csv.hpp"
#include "trafficlens/estimator.hpp"
#include "trafficlens/gridio.hpp"
#include "trafficlens/spatial.hpp"
#include "trafficlens/stats.hpp"

namespace trafficlens::report {

using ZoneValues = std::map<ZoneId, double>;

inline constexpr const char* kGroundTruthColumn = "groundtruth_per_1000";

/// Window-total traffic per zone for one service (DL).
inline ZoneValues zone_totals(const TrafficBundle& bundle, const std::string& service, const ZoneMap& zones,
                              unsigned threads = 1) {
  const auto series = spatial::aggregate_to_zones(bundle.get(service, Direction::DL), zones, threads);
  ZoneValues out;
  for (std::size_t z = 0; z < series.zones.size(); ++z) out[series.zones[z]] = series.zone_total(z);
  return out;
}

// ---------------------------------------------------------------------------
// validate

struct MeasureCorrelation {
  std::string measure;
  std::size_t n = 0;
  double r = 0.0;
  double p = 1.0;
};

struct PairedTest {
  std::string comparison;  // "cpc vs <service>"
  stats::CorrTestResult result;
};

struct ValidationReport {
  std::size_t n = 0;
  std::vector<MeasureCorrelation> correlations;
  std::vector<PairedTest> tests;
};

/// Spearman correlation of each service's log traffic per 1000 inhabitants
/// and of log(cpc) with ground truth, over the zones where all of them are
/// defined, plus a dependent-correlation test of cpc against each service.
inline ValidationReport validate_estimates(const std::vector<estimator::EstimateRecord>& estimates,
                                           const std::vector<std::pair<std::string, ZoneValues>>& services,
                                           const CovariateTable& covariates, bool one_sided = false,
                                           const std::string& gt_column = kGroundTruthColumn) {
  std::vector<double> gt, cpc_log;
  std::vector<std::vector<double>> svc(services.size());
  for (const auto& rec : estimates) {
    auto g = covariates.get(rec.zone_id, gt_column);
    if (!g || !covariates.valid_population(rec.zone_id)) continue;
    const double pop = *covariates.get(rec.zone_id, "population");
    if (!(rec.cpc > 0.0)) continue;
    std::vector<double> row;
    bool ok = true;
    for (const auto& [name, totals] : services) {
      auto it = totals.find(rec.zone_id);
      std::optional<double> v;
      if (it != totals.end()) v = stats::log_per_1000(it->second, pop);
      if (!v) {
        ok = false;
        break;
      }
      row.push_back(*v);
    }
    if (!ok) continue;
    gt.push_back(*g);
    cpc_log.push_back(std::log(rec.cpc));
    for (std::size_t s = 0; s < services.size(); ++s) svc[s].push_back(row[s]);
  }
  if (gt.size() < 10)
    throw InputError("validate: insufficient overlap (" + std::to_string(gt.size()) +
                     " zones with ground truth and valid measures, need >= 10)");

  ValidationReport rep;
  rep.n = gt.size();
  std::vector<double> r_service;
  for (std::size_t s = 0; s < services.size(); ++s) {
    auto sr = stats::spearman(svc[s], gt);
    rep.correlations.push_back({services[s].first, sr.n, sr.r, sr.p});
    r_service.push_back(sr.r);
  }
  auto cr = stats::spearman(cpc_log, gt);
  rep.correlations.push_back({"cpc", cr.n, cr.r, cr.p});
  for (std::size_t s = 0; s < services.size(); ++s) {
    const double r12 = stats::spearman(cpc_log, svc[s]).r;
    rep.tests.push_back({"cpc vs " + services[s].first, stats::dependent_corr_z(cr.r, r_service[s], r12, rep.n, one_sided)});
  }
  return rep;
}

inline csv::Writer correlations_csv(const ValidationReport& rep) {
  csv::Writer w({"measure", "n", "spearman_r", "p_value"});
  for (const auto& c : rep.correlations) w.row({c.measure, std::to_string(c.n), format_double(c.r), format_double(c.p)});
  return w;
}

inline csv::Writer paired_tests_csv(const ValidationReport& rep) {
  csv::Writer w({"comparison", "r1", "r2", "r12", "n", "z", "p_value", "sided"});
  for (const auto& t : rep.tests) {
    const auto& r = t.result;
    w.row({t.comparison, format_double(r.r1), format_double(r.r2), format_double(r.r12), std::to_string(r.n),
           format_double(r.z), format_double(r.p), r.one_sided ? "one" : "two"});
  }
  return w;
}

// ---------------------------------------------------------------------------
// regress

struct RegressionSpec {
  std::vector<std::string> covariates;
  std::vector<std::string> extra_covariates;  // e.g. drug_abuse_rate
  stats::HcType hc = stats::HcType::HC1;
  bool exclude_zero_groundtruth = false;
  std::string groundtruth = kGroundTruthColumn;
};

struct RegressionPair {
  stats::RegressionResult cpc_on_groundtruth;  // log_cpc ~ covariates + groundtruth
  stats::RegressionResult groundtruth_on_cpc;  // groundtruth ~ covariates + log_cpc
  std::size_t n_listwise_deleted = 0;
  std::size_t n_zero_excluded = 0;
};

inline constexpr const char* kLogCpc = "log_cpc";

/// Both regression directions on the listwise-complete zones.
inline RegressionPair run_regressions(const std::vector<estimator::EstimateRecord>& estimates,
                                      const CovariateTable& covariates, const RegressionSpec& spec) {
  std::vector<std::string> names = spec.covariates;
  names.insert(names.end(), spec.extra_covariates.begin(), spec.extra_covariates.end());
  for (const auto& n : names)
    if (!covariates.has_column(n)) throw InputError("regress: unknown covariate '" + n + "'");
  if (!covariates.has_column(spec.groundtruth))
    throw InputError("regress: unknown ground-truth column '" + spec.groundtruth + "'");

  RegressionPair out;
  std::vector<std::vector<double>> rows;
  std::vector<double> log_cpc, gt;
  for (const auto& rec : estimates) {
    auto g = covariates.get(rec.zone_id, spec.groundtruth);
    std::vector<double> row;
    bool complete = g.has_value() && rec.cpc > 0.0;
    for (const auto& n : names) {
      if (!complete) break;
      auto v = covariates.get(rec.zone_id, n);
      if (!v) complete = false;
      else row.push_back(*v);
    }
    if (!complete) {
      ++out.n_listwise_deleted;
      continue;
    }
    if (spec.exclude_zero_groundtruth && *g == 0.0) {
      ++out.n_zero_excluded;
      continue;
    }
    rows.push_back(std::move(row));
    log_cpc.push_back(std::log(rec.cpc));
    gt.push_back(*g);
  }
  const std::size_t n = rows.size();
  stats::Matrix x(n, names.size() + 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < names.size(); ++j) x(i, j) = rows[i][j];

  auto with_last = [&](const std::vector<double>& last, const std::string& last_name) {
    stats::Matrix m = x;
    for (std::size_t i = 0; i < n; ++i) m(i, names.size()) = last[i];
    auto nm = names;
    nm.push_back(last_name);
    return std::pair{m, nm};
  };
  {
    auto [m, nm] = with_last(gt, spec.groundtruth);
    out.cpc_on_groundtruth = stats::ols_hc(m, log_cpc, true, spec.hc, nm);
  }
  {
    auto [m, nm] = with_last(log_cpc, kLogCpc);
    out.groundtruth_on_cpc = stats::ols_hc(m, gt, true, spec.hc, nm);
  }
  return out;
}

inline csv::Writer coefficients_csv(const RegressionPair& rp) {
  csv::Writer w({"model", "term", "coef", "se_robust", "t", "p_value", "stars"});
  auto emit = [&](const std::string& model, const stats::RegressionResult& r) {
    for (std::size_t j = 0; j < r.coef.size(); ++j)
      w.row({model, r.names[j], format_double(r.coef[j]), format_double(r.se_robust[j]), format_double(r.t_stats[j]),
             format_double(r.p_values[j]), stats::significance_stars(r.p_values[j])});
  };
  emit("log_cpc", rp.cpc_on_groundtruth);
  emit("groundtruth", rp.groundtruth_on_cpc);
  return w;
}

inline csv::Writer summary_csv(const RegressionPair& rp) {
  csv::Writer w({"model", "n", "p", "r2", "adj_r2", "hc_type"});
  for (const auto& [model, r] : {std::pair{"log_cpc", &rp.cpc_on_groundtruth}, std::pair{"groundtruth", &rp.groundtruth_on_cpc}})
    w.row({model, std::to_string(r->n), std::to_string(r->p), format_double(r->r2), format_double(r->adj_r2),
           stats::to_string(r->hc_type)});
  return w;
}

/// Side-by-side text table with robust SEs in parentheses.
inline std::string format_regression_table(const RegressionPair& rp) {
  const auto& a = rp.cpc_on_groundtruth;
  const auto& b = rp.groundtruth_on_cpc;
  std::vector<std::string> terms;
  for (const auto* r : {&a, &b})
    for (const auto& n : r->names)
      if (std::find(terms.begin(), terms.end(), n) == terms.end()) terms.push_back(n);
  auto cell = [](const stats::RegressionResult& r, const std::string& term, bool se) -> std::string {
    auto it = std::find(r.names.begin(), r.names.end(), term);
    if (it == r.names.end()) return "";
    const auto j = static_cast<std::size_t>(it - r.names.begin());
    char buf[64];
    if (se)
      std::snprintf(buf, sizeof(buf), "(%.4f)", r.se_robust[j]);
    else
      std::snprintf(buf, sizeof(buf), "%.4f%s", r.coef[j], stats::significance_stars(r.p_values[j]).c_str());
    return buf;
  };
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %18s %18s\n", "", "(1) log_cpc", "(2) groundtruth");
  os << line;
  for (const auto& t : terms) {
    std::snprintf(line, sizeof(line), "%-24s %18s %18s\n", t.c_str(), cell(a, t, false).c_str(), cell(b, t, false).c_str());
    os << line;
    std::snprintf(line, sizeof(line), "%-24s %18s %18s\n", "", cell(a, t, true).c_str(), cell(b, t, true).c_str());
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-24s %18zu %18zu\n", "Observations", a.n, b.n);
  os << line;
  std::snprintf(line, sizeof(line), "%-24s %18.4f %18.4f\n", "R2", a.r2, b.r2);
  os << line;
  std::snprintf(line, sizeof(line), "%-24s %18.4f %18.4f\n", "Adjusted R2", a.adj_r2, b.adj_r2);
  os << line;
  os << "Heteroscedasticity-robust (" << stats::to_string(a.hc_type) << ") SE in parentheses. "
     << "* p<0.1; ** p<0.05; *** p<0.01\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// heatmap

/// Day-of-week (Monday = 0) x hour-of-day sums, index d * 24 + h.
using Heatmap = std::array<double, kHoursPerWeek>;

/// Sums every slot into its wall-clock (weekday, hour) cell. With
/// `tile_weights`, each tile's contribution is scaled by its weight (tiles
/// absent from the map are skipped).
inline Heatmap weekly_heatmap(const ServiceTrafficMatrix& m, const std::map<TileId, double>* tile_weights = nullptr) {
  Heatmap h{};
  std::vector<std::size_t> cell(m.n_slots());
  for (std::size_t t = 0; t < m.n_slots(); ++t) cell[t] = week_hour_of(m.time().slot_time(t));
  auto add_tile = [&](TileId tile, double w) {
    auto row = m.row(tile);
    for (std::size_t t = 0; t < row.size(); ++t) h[cell[t]] += w * row[t];
  };
  if (tile_weights) {
    for (const auto& [tile, w] : *tile_weights) {
      if (tile >= m.n_tiles()) throw InputError("heatmap: tile " + std::to_string(tile) + " outside grid");
      add_tile(tile, w);
    }
  } else {
    for (TileId tile = 0; tile < m.n_tiles(); ++tile) add_tile(tile, 1.0);
  }
  return h;
}

inline Heatmap normalize_by_max(const Heatmap& h) {
  const double mx = *std::max_element(h.begin(), h.end());
  Heatmap out{};
  if (mx > 0.0)
    for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] / mx;
  return out;
}

/// Tile weights covering the `count` zones with the highest cpc (ties by zone id).
inline std::map<TileId, double> top_cpc_tiles(const std::vector<estimator::EstimateRecord>& estimates,
                                              const ZoneMap& zones, std::size_t count = 10) {
  std::vector<const estimator::EstimateRecord*> order;
  for (const auto& r : estimates) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->cpc != b->cpc ? a->cpc > b->cpc : a->zone_id < b->zone_id; });
  std::set<ZoneId> chosen;
  for (std::size_t i = 0; i < std::min(count, order.size()); ++i) chosen.insert(order[i]->zone_id);
  std::map<TileId, double> weights;
  for (const auto& e : zones.entries())
    if (chosen.count(e.zone)) weights[e.tile] += e.weight;
  return weights;
}

/// Header h00..h23, then one row per weekday Monday..Sunday.
inline csv::Writer heatmap_csv(const Heatmap& h) {
  std::vector<std::string> header;
  for (int hr = 0; hr < 24; ++hr) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "h%02d", hr);
    header.emplace_back(buf);
  }
  csv::Writer w(header);
  for (std::size_t d = 0; d < 7; ++d) {
    std::vector<std::string> row;
    for (std::size_t hr = 0; hr < 24; ++hr) row.push_back(format_double(h[d * 24 + hr]));
    w.row(row);
  }
  return w;
}

// ---------------------------------------------------------------------------
// GeoJSON export

/// One feature per estimated zone. Zones with a polygon in `geometry` (a
/// FeatureCollection whose features carry properties.zone_id) reuse it; the
/// rest get a point at the weighted centroid of their tile centres.
inline nlohmann::ordered_json export_geojson(const std::vector<estimator::EstimateRecord>& estimates, const ZoneMap& zones,
                                             const GridGeometry& grid, const nlohmann::json* geometry = nullptr) {
  std::map<ZoneId, nlohmann::json> shapes;
  if (geometry) {
    if (!geometry->is_object() || geometry->value("type", "") != "FeatureCollection" || !geometry->contains("features"))
      throw InputError("geometry file is not a GeoJSON FeatureCollection");
    std::set<ZoneId> known;
    for (const auto& r : estimates) known.insert(r.zone_id);
    std::vector<std::string> orphans;
    for (const auto& f : geometry->at("features")) {
      if (!f.contains("properties") || !f["properties"].contains("zone_id") || !f.contains("geometry"))
        throw InputError("geometry feature without properties.zone_id or geometry");
      const auto& zid = f["properties"]["zone_id"];
      std::string id = zid.is_string() ? zid.get<std::string>() : zid.dump();
      if (!known.count(id)) orphans.push_back(id);
      else shapes[id] = f["geometry"];
    }
    if (!orphans.empty()) {
      std::string msg = "geometry references zones without estimates:";
      for (const auto& o : orphans) msg += " " + o;
      throw InputError(msg);
    }
  }
  std::map<ZoneId, std::array<double, 3>> centroid;  // sum wx, sum wy, sum w
  for (const auto& e : zones.entries()) {
    if (e.tile >= grid.n_tiles()) throw InputError("zone map references tile outside the grid");
    auto [x, y] = grid.tile_center(e.tile);
    auto& c = centroid[e.zone];
    c[0] += e.weight * x;
    c[1] += e.weight * y;
    c[2] += e.weight;
  }
  nlohmann::ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = nlohmann::ordered_json::array();
  for (const auto& r : estimates) {
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    if (auto it = shapes.find(r.zone_id); it != shapes.end()) {
      f["geometry"] = it->second;
    } else {
      auto c = centroid.find(r.zone_id);
      if (c == centroid.end()) throw InputError("zone '" + r.zone_id + "' has neither geometry nor tiles");
      f["geometry"] = {{"type", "Point"}, {"coordinates", {c->second[0] / c->second[2], c->second[1] / c->second[2]}}};
    }
    f["properties"] = {{"zone_id", r.zone_id}, {"cpc", r.cpc}, {"rho", r.rho}, {"c", r.c}};
    fc["features"].push_back(std::move(f));
  }
  return fc;
}

}  // namespace trafficlens::report
