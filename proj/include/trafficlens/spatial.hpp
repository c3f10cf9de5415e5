#pragma once

// Tile -> zone aggregation, hotspot selection and POI statistics.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "trafficlens/common.hpp"
#include "trafficlens/gridio.hpp"

namespace trafficlens::spatial {

/// Tile x wall-clock-hour traffic (sum of the constituent 15-minute slots).
struct HourlyMatrix {
  TimeGrid time;
  std::size_t n_tiles = 0;
  std::size_t n_hours = 0;
  std::vector<double> values;

  std::span<const double> row(TileId tile) const {
    return std::span<const double>(values).subspan(tile * n_hours, n_hours);
  }
};

inline HourlyMatrix to_hourly(const ServiceTrafficMatrix& m) {
  HourlyMatrix h;
  h.time = m.time();
  h.n_tiles = m.n_tiles();
  h.n_hours = m.time().n_hours();
  h.values.assign(h.n_tiles * h.n_hours, 0.0);
  const std::size_t lead = m.time().leading_slots();
  for (TileId tile = 0; tile < h.n_tiles; ++tile) {
    auto src = m.row(tile);
    double* dst = h.values.data() + tile * h.n_hours;
    for (std::size_t t = 0; t < src.size(); ++t) dst[(lead + t) / kSlotsPerHour] += src[t];
  }
  return h;
}

/// Hourly traffic per zone for one (service, direction). Zones follow ZoneMap order.
struct ZoneSeries {
  std::string service;
  Direction direction = Direction::DL;
  std::vector<ZoneId> zones;
  std::size_t n_hours = 0;
  Minutes first_hour{};
  std::vector<double> values;  // zone-major

  std::span<const double> row(std::size_t zone) const {
    return std::span<const double>(values).subspan(zone * n_hours, n_hours);
  }

  double zone_total(std::size_t zone) const {
    double s = 0.0;
    for (double v : row(zone)) s += v;
    return s;
  }
};

inline ZoneSeries aggregate_to_zones(const ServiceTrafficMatrix& m, const ZoneMap& zones, unsigned threads = 1) {
  zones.check_tiles(m.n_tiles());
  const HourlyMatrix hourly = to_hourly(m);
  std::vector<std::vector<std::pair<TileId, double>>> members(zones.n_zones());
  for (const auto& e : zones.entries()) members[*zones.zone_index(e.zone)].emplace_back(e.tile, e.weight);

  ZoneSeries out;
  out.service = m.service();
  out.direction = m.direction();
  out.zones = zones.zones();
  out.n_hours = hourly.n_hours;
  out.first_hour = m.time().hour_start(0);
  out.values.assign(zones.n_zones() * out.n_hours, 0.0);
  parallel_for(zones.n_zones(), threads, [&](std::size_t z) {
    double* dst = out.values.data() + z * out.n_hours;
    for (const auto& [tile, w] : members[z]) {
      auto src = hourly.row(tile);
      for (std::size_t h = 0; h < out.n_hours; ++h) dst[h] += w * src[h];
    }
  });
  return out;
}

inline std::vector<double> tile_totals(const ServiceTrafficMatrix& m) {
  std::vector<double> out(m.n_tiles());
  for (TileId t = 0; t < m.n_tiles(); ++t) out[t] = m.tile_total(t);
  return out;
}

/// k = ceil(q * n_tiles); a product within 1e-9 (relative) of an integer counts as that integer.
inline std::size_t quantile_count(double q, std::size_t n_tiles) {
  const double prod = q * static_cast<double>(n_tiles);
  const double nearest = std::round(prod);
  if (std::abs(prod - nearest) <= 1e-9 * std::max(1.0, prod)) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(prod));
}

/// The ceil(q * n) tiles with the highest window-total traffic, in descending
/// order; ties go to the lower tile id.
inline std::vector<TileId> top_quantile_tiles(const ServiceTrafficMatrix& m, double q) {
  if (!(q > 0.0 && q < 1.0)) throw InputError("top_quantile_tiles: q must lie in (0, 1), got " + format_double(q));
  const auto totals = tile_totals(m);
  const std::size_t k = std::max<std::size_t>(1, quantile_count(q, totals.size()));
  std::vector<TileId> ids(totals.size());
  std::iota(ids.begin(), ids.end(), 0);
  auto better = [&](TileId a, TileId b) { return totals[a] != totals[b] ? totals[a] > totals[b] : a < b; };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), better);
  ids.resize(k);
  return ids;
}

/// Keeps the first row per place_id, preserving input order.
inline PoiTable dedup_pois(const PoiTable& pois) {
  PoiTable out;
  out.n_outside = pois.n_outside;
  std::unordered_set<std::string> seen;
  for (const auto& p : pois.rows)
    if (seen.insert(p.place_id).second) out.rows.push_back(p);
  return out;
}

struct PoiCategoryStat {
  std::string category;
  std::size_t n_pois = 0;
  double avg_traffic_per_poi = 0.0;
};

struct PoiStatsResult {
  std::vector<PoiCategoryStat> stats;           // sorted by average, descending
  std::vector<TileId> hot_tiles_without_pois;   // diagnostics
};

/// Per-POI traffic = tile total / POIs in the tile; category average over the
/// POIs that sit in hot tiles. Categories with fewer than min_count POIs are dropped.
inline PoiStatsResult poi_category_stats(const std::vector<TileId>& hot_tiles, const PoiTable& pois,
                                         const ServiceTrafficMatrix& m, std::size_t min_count = 3) {
  std::unordered_map<TileId, std::size_t> per_tile;
  for (const auto& p : pois.rows) {
    if (p.tile >= m.n_tiles())
      throw InputError("POI '" + p.place_id + "' lies in tile " + std::to_string(p.tile) +
                       ", which is absent from the traffic matrix");
    ++per_tile[p.tile];
  }
  std::unordered_map<TileId, double> hot_total;
  PoiStatsResult res;
  for (TileId t : hot_tiles) {
    if (t >= m.n_tiles()) throw InputError("hot tile " + std::to_string(t) + " outside traffic matrix");
    hot_total[t] = m.tile_total(t);
    if (!per_tile.count(t)) res.hot_tiles_without_pois.push_back(t);
  }
  std::map<std::string, std::pair<std::size_t, std::vector<double>>> by_cat;
  for (const auto& p : pois.rows) {
    auto it = hot_total.find(p.tile);
    if (it == hot_total.end()) continue;
    auto& slot = by_cat[p.category];
    ++slot.first;
    slot.second.push_back(it->second / static_cast<double>(per_tile[p.tile]));
  }
  for (auto& [cat, entry] : by_cat) {
    if (entry.first < min_count) continue;
    // order-independent mean: sort the per-POI shares before summing
    std::sort(entry.second.begin(), entry.second.end());
    double s = 0.0;
    for (double v : entry.second) s += v;
    res.stats.push_back({cat, entry.first, s / static_cast<double>(entry.first)});
  }
  std::stable_sort(res.stats.begin(), res.stats.end(), [](const auto& a, const auto& b) {
    return a.avg_traffic_per_poi > b.avg_traffic_per_poi;
  });
  return res;
}

}  // namespace trafficlens::spatial
