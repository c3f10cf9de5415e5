#pragma once

// Per-zone mixture-share estimation: hourly correlation of the carrier
// service with the reference service, clamping, correction factor and the
// per-1000-inhabitant consumption estimate.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trafficlens/common.hpp"
#include "trafficlens/csv.hpp"
#include "trafficlens/gridio.hpp"
#include "trafficlens/spatial.hpp"
#include "trafficlens/stats/correlation.hpp"

namespace trafficlens::estimator {

/// Literature shares composing the global prior.
struct GlobalPriors {
  double onion_share = 0.011;        // onion-service share of carrier traffic
  double porn_share_global = 0.417;  // pornography share of onion pages
  double csam_share = 0.415;         // target-content share within that category

  void validate() const {
    for (double v : {onion_share, porn_share_global, csam_share})
      if (!(v > 0.0 && v < 1.0)) throw InputError("priors must each lie in (0, 1), got " + format_double(v));
  }
};

inline constexpr double kDefaultEpsilon = 1e-4;

inline double global_share(const GlobalPriors& p) { return p.onion_share * p.porn_share_global * p.csam_share; }

/// Pearson correlation of ref[i] against carrier[i + lag_hours] over the
/// overlapping window (no wrap-around). A positive lag matches a carrier that
/// trails the reference pattern. Missing when fewer than 3 aligned points
/// remain or either side has zero variance.
inline std::optional<double> zone_correlation(std::span<const double> ref, std::span<const double> carrier,
                                              int lag_hours) {
  if (ref.size() != carrier.size()) throw InputError("zone_correlation: series lengths differ");
  const std::size_t n = ref.size();
  const std::size_t shift = static_cast<std::size_t>(std::abs(lag_hours));
  if (shift + 3 > n) return std::nullopt;
  const std::size_t len = n - shift;
  auto r = lag_hours >= 0 ? ref.subspan(0, len) : ref.subspan(shift, len);
  auto c = lag_hours >= 0 ? carrier.subspan(shift, len) : carrier.subspan(0, len);
  try {
    return stats::pearson(r, c);
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

/// Non-positive correlations are replaced by epsilon.
inline double clamp_rho(double rho, double epsilon = kDefaultEpsilon) {
  if (!(epsilon > 0.0)) throw InputError("clamp epsilon must be positive");
  return rho > 0.0 ? rho : epsilon;
}

inline double correction_factor(double rho_prime, const GlobalPriors& priors = {}) {
  return priors.onion_share * priors.csam_share * rho_prime;
}

/// Consumption estimate per 1000 inhabitants.
inline double cpc(double c, double tor_dl, double pop) {
  if (!(pop > 0.0)) throw InputError("invalid population " + format_double(pop));
  if (!(tor_dl >= 0.0)) throw InputError("negative carrier traffic");
  return c * tor_dl / pop * 1000.0;
}

struct EstimateRecord {
  ZoneId zone_id;
  double rho = 0.0;
  double rho_prime = 0.0;
  double c = 0.0;
  double tor_dl = 0.0;
  double pop = 0.0;
  double cpc = 0.0;
};

struct Diagnostic {
  ZoneId zone_id;
  std::string reason;
};

struct EstimatorConfig {
  std::string reference_service = "web_adult";
  std::string carrier_service = "tor";
  int lag_hours = 0;
  double epsilon = kDefaultEpsilon;
  GlobalPriors priors;
  unsigned threads = 1;
};

struct PipelineResult {
  std::vector<EstimateRecord> records;
  std::vector<Diagnostic> diagnostics;
  std::size_t n_clamped = 0;
};

/// Correlation input for the clamp -> correction -> cpc stage.
struct ZoneRho {
  ZoneId zone_id;
  double rho;
  double tor_dl;
  double pop;
};

inline PipelineResult finalize_estimates(const std::vector<ZoneRho>& zones, const EstimatorConfig& cfg) {
  cfg.priors.validate();
  PipelineResult out;
  out.records.reserve(zones.size());
  for (const auto& z : zones) {
    EstimateRecord rec;
    rec.zone_id = z.zone_id;
    rec.rho = z.rho;
    rec.rho_prime = clamp_rho(z.rho, cfg.epsilon);
    if (!(z.rho > 0.0)) ++out.n_clamped;
    rec.c = correction_factor(rec.rho_prime, cfg.priors);
    rec.tor_dl = z.tor_dl;
    rec.pop = z.pop;
    rec.cpc = cpc(rec.c, z.tor_dl, z.pop);
    out.records.push_back(std::move(rec));
  }
  return out;
}

/// Hourly resampling -> zone aggregation -> per-zone correlation -> estimates.
inline PipelineResult run_pipeline(const TrafficBundle& bundle, const ZoneMap& zones, const CovariateTable& covariates,
                                   const EstimatorConfig& cfg) {
  if (zones.n_zones() == 0) throw InputError("empty zone universe");
  const auto& ref = bundle.get(cfg.reference_service, Direction::DL);
  const auto& car = bundle.get(cfg.carrier_service, Direction::DL);
  if (!(ref.grid() == car.grid()) || !(ref.time() == car.time()))
    throw InputError("reference and carrier series are on different grids");

  const auto ref_z = spatial::aggregate_to_zones(ref, zones, cfg.threads);
  const auto car_z = spatial::aggregate_to_zones(car, zones, cfg.threads);

  const std::size_t nz = zones.n_zones();
  std::vector<std::optional<double>> rho(nz);
  parallel_for(nz, cfg.threads, [&](std::size_t z) { rho[z] = zone_correlation(ref_z.row(z), car_z.row(z), cfg.lag_hours); });

  std::vector<ZoneRho> usable;
  std::vector<Diagnostic> diags;
  for (std::size_t z = 0; z < nz; ++z) {
    const auto& id = zones.zones()[z];
    if (!covariates.valid_population(id)) {
      diags.push_back({id, "missing or invalid population"});
      continue;
    }
    if (!rho[z]) {
      diags.push_back({id, "correlation undefined (zero-variance or too-short series)"});
      continue;
    }
    usable.push_back({id, *rho[z], car_z.zone_total(z), *covariates.get(id, "population")});
  }
  auto out = finalize_estimates(usable, cfg);
  out.diagnostics = std::move(diags);
  return out;
}

inline csv::Writer estimates_csv(const std::vector<EstimateRecord>& records) {
  csv::Writer w({"zone_id", "rho", "rho_prime", "c", "tor_dl", "pop", "cpc"});
  for (const auto& r : records)
    w.row({r.zone_id, format_double(r.rho), format_double(r.rho_prime), format_double(r.c), format_double(r.tor_dl),
           format_double(r.pop), format_double(r.cpc)});
  return w;
}

inline csv::Writer diagnostics_csv(const PipelineResult& res) {
  csv::Writer w({"zone_id", "reason"});
  for (const auto& d : res.diagnostics) w.row({d.zone_id, d.reason});
  w.row({"*", "clamped_zones=" + std::to_string(res.n_clamped)});
  return w;
}

inline std::vector<EstimateRecord> load_estimates(const std::string& path) {
  auto t = csv::read_file(path);
  const std::size_t cols[] = {t.require("rho"), t.require("rho_prime"), t.require("c"),
                              t.require("tor_dl"), t.require("pop"), t.require("cpc")};
  const auto zc = t.require("zone_id");
  std::vector<EstimateRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    out.push_back({t.rows[r][zc], t.number(r, cols[0]), t.number(r, cols[1]), t.number(r, cols[2]),
                   t.number(r, cols[3]), t.number(r, cols[4]), t.number(r, cols[5])});
  return out;
}

}  // namespace trafficlens::estimator
