#pragma once

// Seeded synthetic traffic bundles with a planted per-zone share alpha of the
// carrier service that follows the reference service's weekly pattern.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trafficlens/common.hpp"
#include "trafficlens/csv.hpp"
#include "trafficlens/gridio.hpp"

namespace trafficlens::synth {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent substream seed for (seed, stream).
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream * 0xD1B54A32D192ED03ULL + 1));
}

/// mt19937_64 plus hand-written transforms, so draws are identical on every
/// platform (std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double poisson(double mean) {
    if (!(mean > 0.0)) return 0.0;
    if (mean >= 30.0) return std::max(0.0, std::round(mean + std::sqrt(mean) * normal()));
    const double limit = std::exp(-mean);
    double prod = uniform();
    double k = 0.0;
    while (prod > limit) {
      prod *= uniform();
      k += 1.0;
    }
    return k;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Weekly profile indexed by day-of-week (Monday = 0) * 24 + hour.
using WeekTemplate = std::array<double, kHoursPerWeek>;

struct Templates {
  WeekTemplate reference{};  // identifies target-content timing
  WeekTemplate carrier{};    // the carrier's own (non-target) pattern
  WeekTemplate control{};
};

namespace detail {

inline double bump(double x, double width) { return std::exp(-0.5 * (x / width) * (x / width)); }

inline double circular_gap(double h, double centre) {
  double d = std::abs(h - centre);
  return std::min(d, 24.0 - d);
}

inline void normalize_mean(WeekTemplate& t) {
  double s = 0.0;
  for (double v : t) s += v;
  for (double& v : t) v *= static_cast<double>(t.size()) / s;
}

}  // namespace detail

/// Evening-peaked weekly shapes, mean 1. Reference and control have weekday
/// bumps at 08:00 and 13:00; the carrier is blocky and bursty.
inline Templates default_templates() {
  using detail::bump;
  using detail::circular_gap;
  static constexpr std::array<double, 7> day_mult{1.0, 0.8, 1.2, 0.9, 1.1, 1.4, 1.3};
  static constexpr std::array<double, 8> blocks{1.5, 0.7, 0.3, 0.4, 0.7, 1.2, 0.9, 1.1};
  Templates t;
  for (std::size_t d = 0; d < 7; ++d)
    for (std::size_t h = 0; h < 24; ++h) {
      const double hr = static_cast<double>(h);
      const bool weekday = d < 5;
      const std::size_t i = d * 24 + h;
      double ref = 0.35 - 0.25 * bump(hr - 4.5, 1.5) + 1.6 * bump(circular_gap(hr, 21.5), 1.8) * (weekday ? 1.0 : 1.1);
      double ctl = 0.5 - 0.35 * bump(hr - 4.5, 1.5) + 1.1 * bump(circular_gap(hr, 20.5), 2.2);
      if (weekday) {
        ref += 0.25 * bump(hr - 8.0, 0.8) + 0.3 * bump(hr - 13.0, 0.9);
        ctl += 0.3 * bump(hr - 8.0, 0.8) + 0.35 * bump(hr - 13.0, 0.9);
      } else {
        ref += 0.2 * bump(hr - 15.0, 3.0);
        ctl += 0.3 * bump(hr - 14.0, 3.0);
      }
      t.reference[i] = ref;
      t.control[i] = ctl;
      t.carrier[i] = blocks[h / 3] * day_mult[d] * (i % 5 == 0 ? 1.6 : 1.0);
    }
  detail::normalize_mean(t.reference);
  detail::normalize_mean(t.carrier);
  detail::normalize_mean(t.control);
  return t;
}

struct NoiseModel {
  double sigma = 0.3;   // multiplicative log-normal (mean-one) noise per tile and slot
  double jitter = 0.0;  // mean of the additive Poisson jitter per tile and slot
};

/// groundtruth_per_1000 = intercept + slope * alpha + noise * N(0,1)
struct GroundTruthLink {
  double intercept = 0.0;
  double slope = 10.0;
  double noise = 1.0;
};

struct SynthSpec {
  std::size_t n_zones = 50;
  std::size_t tiles_per_zone = 4;
  std::size_t n_days = 7;
  Minutes start = parse_timestamp("2019-03-16T00:00");
  Templates templates = default_templates();
  std::vector<double> alpha;  // per zone; drawn from Uniform(alpha_low, alpha_high) when empty
  double alpha_low = 0.0;
  double alpha_high = 0.4;
  double carrier_ref_scale = 1.0;    // A
  double carrier_other_scale = 1.0;  // B
  NoiseModel noise;
  int lag_hours = 0;  // carrier's alpha component trails the reference pattern by this many hours
  GroundTruthLink gt_link;
  std::uint64_t seed = 1;

  double pop_median = 14802.0;
  double pop_sigma = 0.8;
  double usage_sigma = 0.2;        // zone-level usage intensity, shared across services
  double tile_burstiness = 0.5;    // log-sd of tile shares within a zone
  double reference_rate = 0.05;    // traffic units per inhabitant and slot
  double carrier_rate = 0.002;
  double control_rate = 0.2;

  bool with_pois = true;
  bool with_trends = true;
};

struct SynthBundle {
  TrafficBundle traffic;  // "web_adult" (reference), "tor" (carrier), "youtube" (control), DL
  ZoneMap zones;
  CovariateTable covariates;  // population, pop_density, poverty_rate, groundtruth_per_1000
  std::vector<std::pair<ZoneId, double>> alpha;
  PoiTable pois;
  TrendsTable trends;
};

inline constexpr const char* kReferenceService = "web_adult";
inline constexpr const char* kCarrierService = "tor";
inline constexpr const char* kControlService = "youtube";

inline std::string zone_name(std::size_t j, std::size_t n_zones) {
  std::size_t width = 4;
  for (std::size_t m = n_zones; m >= 10000; m /= 10) ++width;
  std::string digits = std::to_string(j);
  return "z" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

inline void validate(const SynthSpec& spec) {
  if (spec.n_zones == 0 || spec.tiles_per_zone == 0 || spec.n_days == 0)
    throw InputError("synth: n_zones, tiles_per_zone and n_days must be positive");
  for (const auto* t : {&spec.templates.reference, &spec.templates.carrier, &spec.templates.control}) {
    double s = 0.0;
    for (double v : *t) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("synth: template values must be non-negative");
      s += v;
    }
    if (!(s > 0.0)) throw InputError("synth: template is all zero");
  }
  if (!spec.alpha.empty() && spec.alpha.size() != spec.n_zones)
    throw InputError("synth: alpha has " + std::to_string(spec.alpha.size()) + " entries for " +
                     std::to_string(spec.n_zones) + " zones");
  for (double a : spec.alpha)
    if (!(a >= 0.0 && a < 1.0)) throw InputError("synth: alpha " + format_double(a) + " outside [0, 1)");
  if (spec.alpha.empty() && !(spec.alpha_low >= 0.0 && spec.alpha_low <= spec.alpha_high && spec.alpha_high < 1.0))
    throw InputError("synth: alpha range must satisfy 0 <= low <= high < 1");
  if (!(spec.noise.sigma >= 0.0) || !(spec.noise.jitter >= 0.0))
    throw InputError("synth: noise parameters must be non-negative");
  if (!(spec.carrier_ref_scale >= 0.0) || !(spec.carrier_other_scale >= 0.0))
    throw InputError("synth: carrier mixture scales must be non-negative");
}

namespace detail {

// Substream ids outside the zone range [1, n_zones].
inline constexpr std::uint64_t kAlphaStream = 0;
inline constexpr std::uint64_t kPoiStream = 0xF0000001ULL;
inline constexpr std::uint64_t kTrendsStream = 0xF0000002ULL;

inline PoiTable make_pois(const SynthSpec& spec, const GridGeometry& grid) {
  static const std::array<const char*, 8> categories{"school", "sports_club", "park", "restaurant",
                                                     "hotel", "church", "supermarket", "library"};
  Rng rng(substream_seed(spec.seed, kPoiStream));
  PoiTable out;
  std::size_t next = 0;
  for (std::size_t j = 0; j < spec.n_zones; ++j) {
    const auto count = static_cast<std::size_t>(rng.uniform() * static_cast<double>(2 * spec.tiles_per_zone + 1));
    for (std::size_t i = 0; i < count; ++i) {
      const auto col = static_cast<std::size_t>(rng.uniform() * static_cast<double>(spec.tiles_per_zone));
      const auto cat = categories[static_cast<std::size_t>(rng.uniform() * categories.size())];
      Poi p{"p" + std::to_string(next++), grid.tile_id(j, col), cat};
      out.rows.push_back(p);
      if (rng.uniform() < 0.05) out.rows.push_back(p);  // duplicate listing
    }
  }
  return out;
}

inline TrendsTable make_trends(const SynthSpec& spec) {
  TrendsTable t;
  const std::size_t n_regions = std::min(spec.n_zones, std::clamp<std::size_t>(spec.n_zones / 10, 4, 20));
  constexpr std::size_t kTerms = 18, kSparse = 7;
  for (std::size_t k = 0; k < kTerms; ++k) t.terms.push_back("term" + std::string(k < 9 ? "0" : "") + std::to_string(k + 1));
  Rng rng(substream_seed(spec.seed, kTrendsStream));
  std::vector<double> load_a(kTerms), load_b(kTerms);
  for (std::size_t k = 0; k < kTerms; ++k) {
    load_a[k] = 15.0 * rng.normal();
    load_b[k] = 10.0 * rng.normal();
  }
  for (std::size_t r = 0; r < n_regions; ++r) {
    t.regions.push_back("r" + std::to_string(r + 1));
    const double fa = rng.normal(), fb = rng.normal();
    for (std::size_t k = 0; k < kTerms; ++k) {
      double v = 0.0;
      if (k < kTerms - kSparse) v = std::clamp(50.0 + load_a[k] * fa + load_b[k] * fb + 5.0 * rng.normal(), 0.0, 100.0);
      t.values.push_back(std::round(v * 10.0) / 10.0);
    }
  }
  if (n_regions >= 2)
    for (std::size_t j = 0; j < spec.n_zones; ++j)
      t.region_zones.emplace_back(t.regions[j * n_regions / spec.n_zones], zone_name(j, spec.n_zones));
  return t;
}

}  // namespace detail

/// Builds the bundle. Every zone draws from its own (seed, zone) substream,
/// so the output does not depend on `threads`.
inline SynthBundle generate(const SynthSpec& spec, unsigned threads = 1) {
  validate(spec);
  const std::size_t nz = spec.n_zones, tpz = spec.tiles_per_zone;
  GridGeometry grid{0.0, 0.0, 100.0, nz, tpz};
  TimeGrid time{spec.start, kSlotMinutes, spec.n_days * kSlotsPerDay};
  time.validate();
  const std::size_t ns = time.n_slots;

  std::vector<double> alpha = spec.alpha;
  if (alpha.empty()) {
    Rng rng(substream_seed(spec.seed, detail::kAlphaStream));
    for (std::size_t j = 0; j < nz; ++j) alpha.push_back(spec.alpha_low + (spec.alpha_high - spec.alpha_low) * rng.uniform());
  }

  // Per-slot template values shared by all zones.
  std::vector<double> ref_now(ns), ref_lag(ns), car_own(ns), ctl(ns);
  for (std::size_t t = 0; t < ns; ++t) {
    const Minutes at = time.slot_time(t);
    ref_now[t] = spec.templates.reference[week_hour_of(at)];
    ref_lag[t] = spec.templates.reference[week_hour_of(at - std::chrono::hours{spec.lag_hours})];
    car_own[t] = spec.templates.carrier[week_hour_of(at)];
    ctl[t] = spec.templates.control[week_hour_of(at)];
  }

  std::vector<double> v_ref(grid.n_tiles() * ns), v_car(grid.n_tiles() * ns), v_ctl(grid.n_tiles() * ns);
  std::vector<double> pop(nz), density(nz), poverty(nz), gt(nz);
  const double sigma = spec.noise.sigma;
  const double jitter = spec.noise.jitter;
  const double tile_km2 = grid.cell_size * grid.cell_size / 1e6;

  parallel_for(nz, threads, [&](std::size_t j) {
    Rng rng(substream_seed(spec.seed, j + 1));
    pop[j] = std::max(50.0, std::round(spec.pop_median * std::exp(spec.pop_sigma * rng.normal())));
    const double usage = std::exp(spec.usage_sigma * rng.normal());
    gt[j] = spec.gt_link.intercept + spec.gt_link.slope * alpha[j] + spec.gt_link.noise * rng.normal();
    poverty[j] = std::clamp(0.15 + 0.05 * rng.normal(), 0.0, 1.0);
    density[j] = pop[j] / (static_cast<double>(tpz) * tile_km2);

    std::vector<double> share(tpz);
    double share_sum = 0.0;
    for (auto& s : share) share_sum += (s = std::exp(spec.tile_burstiness * rng.normal()));

    const double a = alpha[j];
    auto noisy = [&](double mean) {
      double v = mean;
      if (sigma > 0.0) v *= std::exp(sigma * rng.normal() - 0.5 * sigma * sigma);
      if (jitter > 0.0) v += rng.poisson(jitter);
      return v;
    };
    for (std::size_t k = 0; k < tpz; ++k) {
      const double w = pop[j] * usage * share[k] / share_sum;
      const TileId tile = grid.tile_id(j, k);
      double* r = v_ref.data() + tile * ns;
      double* c = v_car.data() + tile * ns;
      double* o = v_ctl.data() + tile * ns;
      for (std::size_t t = 0; t < ns; ++t) {
        r[t] = noisy(w * spec.reference_rate * ref_now[t]);
        c[t] = noisy(w * spec.carrier_rate *
                     (a * spec.carrier_ref_scale * ref_lag[t] + (1.0 - a) * spec.carrier_other_scale * car_own[t]));
        o[t] = noisy(w * spec.control_rate * ctl[t]);
      }
    }
  });

  SynthBundle b;
  b.traffic.add(ServiceTrafficMatrix(kReferenceService, Direction::DL, grid, time, std::move(v_ref)));
  b.traffic.add(ServiceTrafficMatrix(kCarrierService, Direction::DL, grid, time, std::move(v_car)));
  b.traffic.add(ServiceTrafficMatrix(kControlService, Direction::DL, grid, time, std::move(v_ctl)));

  std::vector<ZoneMap::Entry> entries;
  b.covariates = CovariateTable({"population", "pop_density", "poverty_rate", "groundtruth_per_1000"});
  for (std::size_t j = 0; j < nz; ++j) {
    const auto id = zone_name(j, nz);
    for (std::size_t k = 0; k < tpz; ++k) entries.push_back({grid.tile_id(j, k), id, 1.0});
    b.covariates.add_row(id, {pop[j], density[j], poverty[j], gt[j]});
    b.alpha.emplace_back(id, alpha[j]);
  }
  b.zones = ZoneMap(std::move(entries));
  if (spec.with_pois) b.pois = detail::make_pois(spec, grid);
  if (spec.with_trends) b.trends = detail::make_trends(spec);
  return b;
}

/// Written file names inside a bundle directory.
struct BundleLayout {
  static constexpr const char* manifest = "manifest.json";
  static constexpr const char* zones = "zones.csv";
  static constexpr const char* covariates = "covariates.csv";
  static constexpr const char* alpha = "alpha.csv";
  static constexpr const char* pois = "pois.csv";
  static constexpr const char* trends = "trends.csv";
  static constexpr const char* regions = "regions.csv";
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  f << text;
}

/// Writes the bundle in the loader formats (day files, manifest, CSVs).
inline void write_bundle(const SynthBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  Manifest manifest;
  manifest.grid = b.traffic.matrices().front().grid();
  manifest.start = b.traffic.matrices().front().time().start;
  for (const auto& m : b.traffic.matrices()) manifest.series.push_back(write_day_files(m, dir));
  write_text(root / BundleLayout::manifest, manifest_to_json(manifest).dump(2) + "\n");

  csv::Writer zones({"tile_id", "zone_id", "weight"});
  for (const auto& e : b.zones.entries()) zones.row({std::to_string(e.tile), e.zone, format_double(e.weight)});
  zones.save((root / BundleLayout::zones).string());
  b.covariates.to_csv().save((root / BundleLayout::covariates).string());

  csv::Writer alpha({"zone_id", "alpha"});
  for (const auto& [z, a] : b.alpha) alpha.row({z, format_double(a)});
  alpha.save((root / BundleLayout::alpha).string());

  if (!b.pois.rows.empty()) {
    const auto& grid = manifest.grid;
    csv::Writer pois({"place_id", "x", "y", "category"});
    for (const auto& p : b.pois.rows) {
      auto [x, y] = grid.tile_center(p.tile);
      pois.row({p.place_id, format_double(x), format_double(y), p.category});
    }
    pois.save((root / BundleLayout::pois).string());
  }
  if (!b.trends.regions.empty() && !b.trends.region_zones.empty()) {
    std::vector<std::string> header{"region_id"};
    header.insert(header.end(), b.trends.terms.begin(), b.trends.terms.end());
    csv::Writer trends(header);
    for (std::size_t r = 0; r < b.trends.regions.size(); ++r) {
      std::vector<std::string> row{b.trends.regions[r]};
      for (std::size_t k = 0; k < b.trends.terms.size(); ++k) row.push_back(format_double(b.trends.at(r, k)));
      trends.row(row);
    }
    trends.save((root / BundleLayout::trends).string());
    csv::Writer regions({"region_id", "zone_id"});
    for (const auto& [r, z] : b.trends.region_zones) regions.row({r, z});
    regions.save((root / BundleLayout::regions).string());
  }
}

}  // namespace trafficlens::synth
