#pragma once

// `trafficlens <subcommand> --config run.json [overrides]`
//
// Exit codes: 0 success, 2 input validation error, 3 numeric failure,
// 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trafficlens/common.hpp"
#include "trafficlens/estimator.hpp"
#include "trafficlens/gridio.hpp"
#include "trafficlens/report.hpp"
#include "trafficlens/spatial.hpp"
#include "trafficlens/synthgen.hpp"
#include "trafficlens/trends.hpp"

namespace trafficlens::cli {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path output_dir = "out";
  fs::path data_dir;  // defaults to <output_dir>/synth
  unsigned threads = 0;
  synth::SynthSpec synth;

  // inputs; empty means "default location under data_dir / output_dir"
  fs::path manifest, zone_map, covariates, pois, trends, region_map, geometry, estimates, pc_scores;

  std::vector<std::string> control_services{synth::kControlService};
  estimator::EstimatorConfig estimate;
  bool validate_one_sided = false;
  report::RegressionSpec regress;
  std::string hotspot_service = synth::kCarrierService;
  double hotspot_q = 0.001;
  std::size_t hotspot_min_count = 3;
  std::string heatmap_service = synth::kCarrierService;
  std::string heatmap_zones = "all";  // or "top10cpc"
  std::size_t pca_k = 3;

  fs::path data(const fs::path& explicit_path, const char* default_name) const {
    if (!explicit_path.empty()) return explicit_path;
    return (data_dir.empty() ? output_dir / "synth" : data_dir) / default_name;
  }
  fs::path manifest_path() const { return data(manifest, synth::BundleLayout::manifest); }
  fs::path zone_map_path() const { return data(zone_map, synth::BundleLayout::zones); }
  fs::path covariates_path() const { return data(covariates, synth::BundleLayout::covariates); }
  fs::path pois_path() const { return data(pois, synth::BundleLayout::pois); }
  fs::path trends_path() const { return data(trends, synth::BundleLayout::trends); }
  fs::path region_map_path() const { return data(region_map, synth::BundleLayout::regions); }
  fs::path estimates_path() const { return estimates.empty() ? output_dir / "estimates.csv" : estimates; }
  fs::path out(const char* name) const { return output_dir / name; }
};

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void parse_synth(const nlohmann::json& j, synth::SynthSpec& s) {
  read(j, "n_zones", s.n_zones);
  read(j, "tiles_per_zone", s.tiles_per_zone);
  read(j, "n_days", s.n_days);
  if (j.contains("start")) s.start = parse_timestamp(j.at("start").get<std::string>());
  read(j, "alpha", s.alpha);
  read(j, "alpha_low", s.alpha_low);
  read(j, "alpha_high", s.alpha_high);
  read(j, "carrier_ref_scale", s.carrier_ref_scale);
  read(j, "carrier_other_scale", s.carrier_other_scale);
  if (j.contains("noise")) {
    read(j.at("noise"), "sigma", s.noise.sigma);
    read(j.at("noise"), "jitter", s.noise.jitter);
  }
  read(j, "lag_hours", s.lag_hours);
  if (j.contains("gt_link")) {
    read(j.at("gt_link"), "intercept", s.gt_link.intercept);
    read(j.at("gt_link"), "slope", s.gt_link.slope);
    read(j.at("gt_link"), "noise", s.gt_link.noise);
  }
  read(j, "pop_median", s.pop_median);
  read(j, "pop_sigma", s.pop_sigma);
  read(j, "usage_sigma", s.usage_sigma);
  read(j, "tile_burstiness", s.tile_burstiness);
  read(j, "with_pois", s.with_pois);
  read(j, "with_trends", s.with_trends);
  read(j, "seed", s.seed);
}

inline estimator::GlobalPriors parse_priors(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto d = parse_double(item);
    if (!d) throw InputError("--priors: bad number '" + item + "'");
    v.push_back(*d);
  }
  if (v.size() != 3) throw InputError("--priors expects onion,porn,csam");
  estimator::GlobalPriors p{v[0], v[1], v[2]};
  p.validate();
  return p;
}

}  // namespace detail

/// Relative paths in the document are resolved against `base`.
inline RunConfig parse_config(const nlohmann::json& j, const fs::path& base) {
  RunConfig c;
  try {
    using detail::read;
    using detail::resolve;
    c.output_dir = resolve(base, j.value("output_dir", std::string("out")));
    if (j.contains("data_dir")) c.data_dir = resolve(base, j.at("data_dir").get<std::string>());
    read(j, "threads", c.threads);
    if (j.contains("seed")) c.synth.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("synth")) detail::parse_synth(j.at("synth"), c.synth);
    if (j.contains("inputs")) {
      const auto& in = j.at("inputs");
      auto path = [&](const char* key, fs::path& dst) {
        if (in.contains(key)) dst = resolve(base, in.at(key).get<std::string>());
      };
      path("manifest", c.manifest);
      path("zone_map", c.zone_map);
      path("covariates", c.covariates);
      path("pois", c.pois);
      path("trends", c.trends);
      path("region_map", c.region_map);
      path("geometry", c.geometry);
      path("estimates", c.estimates);
      path("pc_scores", c.pc_scores);
    }
    if (j.contains("services")) {
      const auto& s = j.at("services");
      read(s, "reference", c.estimate.reference_service);
      read(s, "carrier", c.estimate.carrier_service);
      read(s, "control", c.control_services);
    }
    if (j.contains("estimate")) {
      const auto& e = j.at("estimate");
      read(e, "lag_hours", c.estimate.lag_hours);
      read(e, "epsilon", c.estimate.epsilon);
      if (e.contains("priors")) {
        auto p = e.at("priors").get<std::vector<double>>();
        if (p.size() != 3) throw InputError("estimate.priors expects [onion, porn, csam]");
        c.estimate.priors = {p[0], p[1], p[2]};
      }
    }
    if (j.contains("validate")) read(j.at("validate"), "one_sided", c.validate_one_sided);
    if (j.contains("regress")) {
      const auto& r = j.at("regress");
      read(r, "covariates", c.regress.covariates);
      read(r, "extra_covariates", c.regress.extra_covariates);
      read(r, "exclude_zero_groundtruth", c.regress.exclude_zero_groundtruth);
      read(r, "groundtruth", c.regress.groundtruth);
      if (r.contains("hc_type")) c.regress.hc = stats::parse_hc_type(r.at("hc_type").get<std::string>());
    }
    if (j.contains("hotspots")) {
      const auto& h = j.at("hotspots");
      read(h, "service", c.hotspot_service);
      read(h, "q", c.hotspot_q);
      read(h, "min_count", c.hotspot_min_count);
    }
    if (j.contains("heatmap")) {
      read(j.at("heatmap"), "service", c.heatmap_service);
      read(j.at("heatmap"), "zones", c.heatmap_zones);
    }
    if (j.contains("pca")) read(j.at("pca"), "k", c.pca_k);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  c.estimate.priors.validate();
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config '" + path.string() + "': " + e.what());
  }
  return parse_config(j, path.parent_path());
}

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

inline void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  synth::write_text(p, text);
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns normally or throws InputError / NumericError.

inline void cmd_synth(const RunConfig& c, std::ostream& log) {
  auto dir = c.data_dir.empty() ? c.output_dir / "synth" : c.data_dir;
  auto bundle = synth::generate(c.synth, resolve_threads(c.threads));
  synth::write_bundle(bundle, dir.string());
  log << "synth: wrote " << c.synth.n_zones << " zones x " << c.synth.n_days << " days to " << dir.string() << "\n";
}

inline TrafficBundle load_bundle(const RunConfig& c) {
  return load_traffic(c.manifest_path().string(), resolve_threads(c.threads));
}

inline void cmd_estimate(const RunConfig& c, const fs::path& out, const fs::path& diag, std::ostream& log) {
  auto bundle = load_bundle(c);
  auto zones = load_zone_map(c.zone_map_path().string());
  auto cov = load_covariates(c.covariates_path().string(), {"population"});
  auto cfg = c.estimate;
  cfg.threads = resolve_threads(c.threads);
  auto res = estimator::run_pipeline(bundle, zones, cov, cfg);
  ensure_parent(out);
  ensure_parent(diag);
  estimator::estimates_csv(res.records).save(out.string());
  estimator::diagnostics_csv(res).save(diag.string());
  log << "estimate: " << res.records.size() << " zones estimated, " << res.diagnostics.size() << " excluded, "
      << res.n_clamped << " clamped (lag " << cfg.lag_hours << " h)\n";
}

inline void cmd_validate(const RunConfig& c, const fs::path& out, const fs::path& tests_out, std::ostream& log) {
  auto estimates = estimator::load_estimates(c.estimates_path().string());
  auto bundle = load_bundle(c);
  auto zones = load_zone_map(c.zone_map_path().string());
  auto cov = load_covariates(c.covariates_path().string(), {"population"});
  std::vector<std::pair<std::string, report::ZoneValues>> services;
  std::vector<std::string> names = c.control_services;
  names.push_back(c.estimate.reference_service);
  names.push_back(c.estimate.carrier_service);
  for (const auto& s : names) services.emplace_back(s, report::zone_totals(bundle, s, zones, resolve_threads(c.threads)));
  auto rep = report::validate_estimates(estimates, services, cov, c.validate_one_sided);
  ensure_parent(out);
  ensure_parent(tests_out);
  report::correlations_csv(rep).save(out.string());
  report::paired_tests_csv(rep).save(tests_out.string());
  log << "validate: n = " << rep.n << "\n";
  for (const auto& m : rep.correlations) log << "  " << m.measure << ": r_s = " << m.r << ", p = " << m.p << "\n";
  for (const auto& t : rep.tests) log << "  " << t.comparison << ": z = " << t.result.z << ", p = " << t.result.p << "\n";
}

inline std::vector<estimator::EstimateRecord> load_estimates_for(const RunConfig& c) {
  return estimator::load_estimates(c.estimates_path().string());
}

inline void cmd_regress(const RunConfig& c, const fs::path& out, std::ostream& log) {
  auto estimates = load_estimates_for(c);
  auto cov = load_covariates(c.covariates_path().string());
  if (!c.pc_scores.empty()) {
    auto pcs = load_covariates(c.pc_scores.string());
    for (const auto& col : pcs.columns()) {
      std::map<ZoneId, double> values;
      for (const auto& z : pcs.zone_ids())
        if (auto v = pcs.get(z, col)) values[z] = *v;
      cov.set_column(col, values);
    }
  }
  auto rp = report::run_regressions(estimates, cov, c.regress);
  ensure_parent(out);
  report::coefficients_csv(rp).save(out.string());
  auto stem = out.parent_path() / out.stem();
  report::summary_csv(rp).save(stem.string() + "_summary.csv");
  auto table = report::format_regression_table(rp);
  write_text(stem.string() + "_table.txt", table);
  log << table;
  log << "regress: " << rp.n_listwise_deleted << " zones dropped by listwise deletion, " << rp.n_zero_excluded
      << " zero-ground-truth zones excluded\n";
}

inline void cmd_pca(const RunConfig& c, const fs::path& trends_path, const fs::path& regions_path, std::size_t k,
                    const fs::path& out, std::ostream& log) {
  auto table = load_trends(trends_path.string(), regions_path.string());
  auto res = trends::prepare_trends(table, k);
  ensure_parent(out);
  trends::zone_scores_csv(res).save(out.string());
  auto stem = out.parent_path() / out.stem();
  trends::loadings_csv(res).save(stem.string() + "_loadings.csv");
  trends::explained_csv(res).save(stem.string() + "_explained.csv");
  log << "pca: kept " << res.kept_terms.size() << " terms, dropped " << res.dropped_terms.size() << " sparse terms\n";
  for (std::size_t i = 0; i < res.pca.explained_ratio.size(); ++i)
    log << "  " << trends::component_name(i) << " explains " << res.pca.explained_ratio[i] << "\n";
  (void)c;
}

inline void cmd_hotspots(const RunConfig& c, const std::string& service, double q, std::size_t min_count,
                         const fs::path& out, std::ostream& log) {
  auto bundle = load_bundle(c);
  const auto& m = bundle.get(service, Direction::DL);
  auto hot = spatial::top_quantile_tiles(m, q);
  auto pois = spatial::dedup_pois(load_pois(c.pois_path().string(), m.grid()));
  auto res = spatial::poi_category_stats(hot, pois, m, min_count);
  ensure_parent(out);
  csv::Writer w({"category", "n_pois", "avg_traffic_per_poi"});
  for (const auto& s : res.stats) w.row({s.category, std::to_string(s.n_pois), format_double(s.avg_traffic_per_poi)});
  w.save(out.string());
  auto stem = out.parent_path() / out.stem();
  csv::Writer tiles({"rank", "tile_id", "total_traffic", "has_pois"});
  std::set<TileId> empty(res.hot_tiles_without_pois.begin(), res.hot_tiles_without_pois.end());
  for (std::size_t i = 0; i < hot.size(); ++i)
    tiles.row({std::to_string(i + 1), std::to_string(hot[i]), format_double(m.tile_total(hot[i])),
               empty.count(hot[i]) ? "0" : "1"});
  tiles.save(stem.string() + "_tiles.csv");
  log << "hotspots: " << hot.size() << " tiles, " << res.hot_tiles_without_pois.size() << " without POIs, "
      << pois.n_outside << " POIs outside the grid, " << res.stats.size() << " categories with n >= " << min_count
      << "\n";
}

inline void cmd_heatmap(const RunConfig& c, const std::string& service, const std::string& zones_sel,
                        const fs::path& out, std::ostream& log) {
  auto bundle = load_bundle(c);
  const auto* m = bundle.find(service, Direction::DL);
  if (!m) throw InputError("heatmap: unknown service '" + service + "'");
  report::Heatmap h;
  if (zones_sel == "all") {
    h = report::weekly_heatmap(*m);
  } else if (zones_sel == "top10cpc") {
    auto zones = load_zone_map(c.zone_map_path().string());
    auto weights = report::top_cpc_tiles(load_estimates_for(c), zones, 10);
    h = report::weekly_heatmap(*m, &weights);
  } else {
    throw InputError("heatmap: --zones must be 'all' or 'top10cpc'");
  }
  ensure_parent(out);
  report::heatmap_csv(h).save(out.string());
  auto stem = out.parent_path() / out.stem();
  report::heatmap_csv(report::normalize_by_max(h)).save(stem.string() + "_normalized.csv");
  log << "heatmap: " << service << " (" << zones_sel << ") written to " << out.string() << "\n";
}

inline void cmd_export(const RunConfig& c, const fs::path& geometry, const fs::path& out, std::ostream& log) {
  auto estimates = load_estimates_for(c);
  auto zones = load_zone_map(c.zone_map_path().string());
  auto manifest = load_manifest(c.manifest_path().string());
  std::optional<nlohmann::json> geo;
  if (!geometry.empty()) {
    std::ifstream in(geometry);
    if (!in) throw InputError("cannot open geometry '" + geometry.string() + "'");
    try {
      geo = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("geometry '" + geometry.string() + "': " + e.what());
    }
  }
  auto fc = report::export_geojson(estimates, zones, manifest.grid, geo ? &*geo : nullptr);
  write_text(out, fc.dump(1) + "\n");
  log << "export: " << fc["features"].size() << " features written to " << out.string() << "\n";
}

// ---------------------------------------------------------------------------

/// Parses argv and dispatches; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"trafficlens: per-zone traffic mixture estimation and validation"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<unsigned> threads;
  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--threads", threads, "worker threads (default: all cores)");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic bundle with planted shares");
  std::optional<std::uint64_t> seed;
  std::string synth_out;
  synth_cmd->add_option("--seed", seed);
  synth_cmd->add_option("--out", synth_out, "bundle directory");

  auto* est_cmd = app.add_subcommand("estimate", "per-zone correlation, correction factor and cpc");
  std::optional<int> lag;
  std::optional<double> epsilon;
  std::string priors, est_out, est_diag;
  est_cmd->add_option("--lag-hours", lag);
  est_cmd->add_option("--epsilon", epsilon);
  est_cmd->add_option("--priors", priors, "onion,porn,csam");
  est_cmd->add_option("--out", est_out);
  est_cmd->add_option("--diagnostics", est_diag);

  auto* val_cmd = app.add_subcommand("validate", "rank correlations against ground truth");
  std::string val_est, val_out, val_tests;
  val_cmd->add_option("--estimates", val_est);
  val_cmd->add_option("--out", val_out);
  val_cmd->add_option("--tests-out", val_tests);

  auto* reg_cmd = app.add_subcommand("regress", "OLS with robust SEs in both directions");
  std::string reg_out, reg_hc, reg_est;
  bool exclude_zero = false;
  reg_cmd->add_option("--estimates", reg_est);
  reg_cmd->add_option("--out", reg_out);
  reg_cmd->add_option("--hc", reg_hc, "HC0 or HC1");
  reg_cmd->add_flag("--exclude-zero-groundtruth", exclude_zero);

  auto* pca_cmd = app.add_subcommand("pca", "search-trends principal components per zone");
  std::string pca_trends, pca_regions, pca_out;
  std::optional<std::size_t> pca_k;
  pca_cmd->add_option("--trends", pca_trends);
  pca_cmd->add_option("--region-map", pca_regions);
  pca_cmd->add_option("--k", pca_k);
  pca_cmd->add_option("--out", pca_out);

  auto* hot_cmd = app.add_subcommand("hotspots", "POI categories in the top-traffic tiles");
  std::string hot_service, hot_out;
  std::optional<double> hot_q;
  std::optional<std::size_t> hot_min;
  hot_cmd->add_option("--service", hot_service);
  hot_cmd->add_option("--q", hot_q);
  hot_cmd->add_option("--min-count", hot_min);
  hot_cmd->add_option("--out", hot_out);

  auto* heat_cmd = app.add_subcommand("heatmap", "day-of-week x hour-of-day traffic");
  std::string heat_service, heat_zones, heat_out;
  heat_cmd->add_option("--service", heat_service);
  heat_cmd->add_option("--zones", heat_zones, "all or top10cpc");
  heat_cmd->add_option("--out", heat_out);

  auto* exp_cmd = app.add_subcommand("export", "GeoJSON choropleth of the estimates");
  std::string exp_geom, exp_out;
  exp_cmd->add_option("--geometry", exp_geom);
  exp_cmd->add_option("--out", exp_out);

  for (auto* sub : {synth_cmd, est_cmd, val_cmd, reg_cmd, pca_cmd, hot_cmd, heat_cmd, exp_cmd}) {
    sub->add_option("--config", config_path);
    sub->add_option("--threads", threads);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    int code = app.exit(e, o, eo);
    log << o.str();
    err << eo.str();
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig c = config_path.empty() ? parse_config(nlohmann::json::object(), fs::current_path())
                                      : load_config(config_path);
    if (threads) c.threads = *threads;
    auto path_or = [](const std::string& s, const fs::path& dflt) { return s.empty() ? dflt : fs::path(s); };

    if (synth_cmd->parsed()) {
      if (seed) c.synth.seed = *seed;
      if (!synth_out.empty()) c.data_dir = synth_out;
      cmd_synth(c, log);
    } else if (est_cmd->parsed()) {
      if (lag) c.estimate.lag_hours = *lag;
      if (epsilon) c.estimate.epsilon = *epsilon;
      if (!priors.empty()) c.estimate.priors = detail::parse_priors(priors);
      cmd_estimate(c, path_or(est_out, c.estimates_path()), path_or(est_diag, c.out("diagnostics.csv")), log);
    } else if (val_cmd->parsed()) {
      if (!val_est.empty()) c.estimates = val_est;
      cmd_validate(c, path_or(val_out, c.out("validate_correlations.csv")),
                   path_or(val_tests, c.out("validate_tests.csv")), log);
    } else if (reg_cmd->parsed()) {
      if (!reg_est.empty()) c.estimates = reg_est;
      if (!reg_hc.empty()) c.regress.hc = stats::parse_hc_type(reg_hc);
      if (exclude_zero) c.regress.exclude_zero_groundtruth = true;
      cmd_regress(c, path_or(reg_out, c.out("regress.csv")), log);
    } else if (pca_cmd->parsed()) {
      cmd_pca(c, path_or(pca_trends, c.trends_path()), path_or(pca_regions, c.region_map_path()),
              pca_k.value_or(c.pca_k), path_or(pca_out, c.out("pc_scores.csv")), log);
    } else if (hot_cmd->parsed()) {
      cmd_hotspots(c, hot_service.empty() ? c.hotspot_service : hot_service, hot_q.value_or(c.hotspot_q),
                   hot_min.value_or(c.hotspot_min_count), path_or(hot_out, c.out("poi_stats.csv")), log);
    } else if (heat_cmd->parsed()) {
      const auto service = heat_service.empty() ? c.heatmap_service : heat_service;
      cmd_heatmap(c, service, heat_zones.empty() ? c.heatmap_zones : heat_zones,
                  path_or(heat_out, c.out(("heatmap_" + service + ".csv").c_str())), log);
    } else if (exp_cmd->parsed()) {
      cmd_export(c, exp_geom.empty() ? c.geometry : fs::path(exp_geom), path_or(exp_out, c.out("estimates.geojson")),
                 log);
    }
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace trafficlens::cli
