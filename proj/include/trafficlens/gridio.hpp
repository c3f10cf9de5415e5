#pragma once

// Core data model (time grid, spatial grid, traffic matrices, zone maps,
// covariate / POI / trends tables) and the loaders for every input format.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trafficlens/common.hpp"
#include "trafficlens/csv.hpp"

namespace trafficlens {

using TileId = std::size_t;
using ZoneId = std::string;
using Minutes = std::chrono::sys_time<std::chrono::minutes>;

inline constexpr int kSlotMinutes = 15;
inline constexpr std::size_t kSlotsPerDay = 96;
inline constexpr std::size_t kSlotsPerHour = 4;
inline constexpr std::size_t kHoursPerWeek = 168;

enum class Direction { DL, UL };

inline std::string to_string(Direction d) { return d == Direction::DL ? "DL" : "UL"; }

inline Direction parse_direction(std::string_view s) {
  if (s == "DL") return Direction::DL;
  if (s == "UL") return Direction::UL;
  throw InputError("unknown direction '" + std::string(s) + "' (expected DL or UL)");
}

/// Parses "YYYY-MM-DDTHH:MM" (a space separator is also accepted).
inline Minutes parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  char sep = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d", &y, &mo, &d, &sep, &h, &mi) != 6 ||
      (sep != 'T' && sep != ' '))
    throw InputError("bad timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM)");
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59)
    throw InputError("bad timestamp '" + text + "'");
  return sys_days{ymd} + hours{h} + minutes{mi};
}

inline std::string format_timestamp(Minutes t) {
  using namespace std::chrono;
  auto day = floor<days>(t);
  year_month_day ymd{day};
  auto rem = t - day;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem.count() / 60), static_cast<int>(rem.count() % 60));
  return buf;
}

inline std::string format_yyyymmdd(Minutes t) {
  using namespace std::chrono;
  year_month_day ymd{floor<days>(t)};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d%02u%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Day of week with Monday = 0 ... Sunday = 6.
inline int weekday_of(Minutes t) {
  using namespace std::chrono;
  return static_cast<int>(weekday{floor<days>(t)}.iso_encoding()) - 1;
}

inline int hour_of(Minutes t) {
  using namespace std::chrono;
  return static_cast<int>((t - floor<days>(t)).count() / 60);
}

/// Index into a 168-long (day-of-week x hour-of-day) vector.
inline std::size_t week_hour_of(Minutes t) {
  return static_cast<std::size_t>(weekday_of(t)) * 24 + static_cast<std::size_t>(hour_of(t));
}

/// Local wall-clock 15-minute slot grid. No DST handling.
struct TimeGrid {
  Minutes start{};
  int step_minutes = kSlotMinutes;
  std::size_t n_slots = 0;

  void validate() const {
    if (step_minutes != kSlotMinutes) throw InputError("time grid step must be 15 minutes");
    if (n_slots == 0) throw InputError("time grid has no slots");
    if (start.time_since_epoch().count() % kSlotMinutes != 0)
      throw InputError("time grid start " + format_timestamp(start) + " is not 15-minute aligned");
  }

  Minutes slot_time(std::size_t t) const {
    return start + std::chrono::minutes{static_cast<long long>(t) * step_minutes};
  }
  int weekday(std::size_t t) const { return weekday_of(slot_time(t)); }
  int hour(std::size_t t) const { return hour_of(slot_time(t)); }

  /// Slots preceding the first full hour boundary within the first hour.
  std::size_t leading_slots() const {
    using namespace std::chrono;
    auto into_hour = (start - floor<hours>(start)).count();
    return static_cast<std::size_t>(into_hour / step_minutes);
  }

  /// Number of wall-clock hours touched by the window.
  std::size_t n_hours() const {
    return (leading_slots() + n_slots + kSlotsPerHour - 1) / kSlotsPerHour;
  }

  /// Wall-clock hour bin that slot t falls into.
  std::size_t hour_bin(std::size_t t) const { return (leading_slots() + t) / kSlotsPerHour; }

  Minutes hour_start(std::size_t h) const {
    using namespace std::chrono;
    return floor<hours>(start) + hours{static_cast<long long>(h)};
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Square-cell raster on a projected plane; tile_id = row * n_cols + col.
struct GridGeometry {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_size = 100.0;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;

  std::size_t n_tiles() const { return n_rows * n_cols; }

  TileId tile_id(std::size_t row, std::size_t col) const { return row * n_cols + col; }

  std::pair<std::size_t, std::size_t> row_col(TileId id) const { return {id / n_cols, id % n_cols}; }

  std::optional<TileId> tile_at(double x, double y) const {
    if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
    double c = std::floor((x - origin_x) / cell_size);
    double r = std::floor((y - origin_y) / cell_size);
    if (c < 0 || r < 0 || c >= static_cast<double>(n_cols) || r >= static_cast<double>(n_rows))
      return std::nullopt;
    return tile_id(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  }

  std::pair<double, double> tile_center(TileId id) const {
    auto [r, c] = row_col(id);
    return {origin_x + (static_cast<double>(c) + 0.5) * cell_size,
            origin_y + (static_cast<double>(r) + 0.5) * cell_size};
  }

  void validate() const {
    if (n_rows == 0 || n_cols == 0) throw InputError("grid geometry has no tiles");
    if (!(cell_size > 0)) throw InputError("grid cell_size must be positive");
  }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Dense non-negative traffic, tiles x 15-minute slots, for one (service, direction).
class ServiceTrafficMatrix {
 public:
  ServiceTrafficMatrix() = default;

  ServiceTrafficMatrix(std::string service, Direction direction, GridGeometry grid, TimeGrid time,
                       std::vector<double> values)
      : service_(std::move(service)),
        direction_(direction),
        grid_(grid),
        time_(time),
        values_(std::move(values)) {
    grid_.validate();
    time_.validate();
    if (values_.size() != grid_.n_tiles() * time_.n_slots)
      throw InputError("traffic matrix for '" + service_ + "' has " + std::to_string(values_.size()) +
                       " values, expected " + std::to_string(grid_.n_tiles() * time_.n_slots));
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InputError("traffic matrix for '" + service_ + "' contains a negative or non-finite value");
  }

  const std::string& service() const { return service_; }
  Direction direction() const { return direction_; }
  const GridGeometry& grid() const { return grid_; }
  const TimeGrid& time() const { return time_; }
  std::size_t n_tiles() const { return grid_.n_tiles(); }
  std::size_t n_slots() const { return time_.n_slots; }
  std::span<const double> values() const { return values_; }

  std::span<const double> row(TileId tile) const {
    return std::span<const double>(values_).subspan(tile * n_slots(), n_slots());
  }
  double at(TileId tile, std::size_t slot) const { return values_[tile * n_slots() + slot]; }

  double tile_total(TileId tile) const {
    double s = 0.0;
    for (double v : row(tile)) s += v;
    return s;
  }

  double total() const {
    double s = 0.0;
    for (TileId t = 0; t < n_tiles(); ++t) s += tile_total(t);
    return s;
  }

 private:
  std::string service_;
  Direction direction_ = Direction::DL;
  GridGeometry grid_;
  TimeGrid time_;
  std::vector<double> values_;
};

/// Set of matrices keyed by (service, direction).
class TrafficBundle {
 public:
  void add(ServiceTrafficMatrix m) {
    if (find(m.service(), m.direction()))
      throw InputError("duplicate series " + m.service() + "/" + to_string(m.direction()));
    matrices_.push_back(std::move(m));
  }

  const ServiceTrafficMatrix* find(std::string_view service, Direction dir) const {
    for (const auto& m : matrices_)
      if (m.service() == service && m.direction() == dir) return &m;
    return nullptr;
  }

  const ServiceTrafficMatrix& get(std::string_view service, Direction dir = Direction::DL) const {
    if (auto* m = find(service, dir)) return *m;
    throw InputError("unknown service '" + std::string(service) + "' (" + to_string(dir) + ")");
  }

  const std::vector<ServiceTrafficMatrix>& matrices() const { return matrices_; }

 private:
  std::vector<ServiceTrafficMatrix> matrices_;
};

/// Weighted tile -> zone assignment. Zones are kept sorted by id.
class ZoneMap {
 public:
  struct Entry {
    TileId tile;
    ZoneId zone;
    double weight;
  };

  ZoneMap() = default;

  explicit ZoneMap(std::vector<Entry> entries) : entries_(std::move(entries)) {
    std::map<TileId, double> tile_sum;
    std::set<std::pair<TileId, ZoneId>> seen;
    std::set<ZoneId> zones;
    for (const auto& e : entries_) {
      if (!(e.weight > 0.0 && e.weight <= 1.0))
        throw InputError("zone map: weight " + format_double(e.weight) + " for tile " +
                         std::to_string(e.tile) + " outside (0,1]");
      if (!seen.emplace(e.tile, e.zone).second)
        throw InputError("zone map: duplicate (tile " + std::to_string(e.tile) + ", zone " + e.zone + ")");
      tile_sum[e.tile] += e.weight;
      zones.insert(e.zone);
    }
    for (const auto& [tile, sum] : tile_sum)
      if (std::abs(sum - 1.0) > 1e-9)
        throw InputError("zone map: weights of tile " + std::to_string(tile) + " sum to " +
                         format_double(sum) + ", expected 1");
    zones_.assign(zones.begin(), zones.end());
    for (std::size_t i = 0; i < zones_.size(); ++i) zone_index_[zones_[i]] = i;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<ZoneId>& zones() const { return zones_; }
  std::size_t n_zones() const { return zones_.size(); }

  std::optional<std::size_t> zone_index(const ZoneId& z) const {
    auto it = zone_index_.find(z);
    if (it == zone_index_.end()) return std::nullopt;
    return it->second;
  }

  void check_tiles(std::size_t n_tiles) const {
    for (const auto& e : entries_)
      if (e.tile >= n_tiles)
        throw InputError("zone map references tile " + std::to_string(e.tile) + " outside grid of " +
                         std::to_string(n_tiles) + " tiles");
  }

 private:
  std::vector<Entry> entries_;
  std::vector<ZoneId> zones_;
  std::unordered_map<ZoneId, std::size_t> zone_index_;
};

/// Per-zone named numeric columns with per-cell missingness.
class CovariateTable {
 public:
  CovariateTable() = default;
  explicit CovariateTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) column_index_[columns_[i]] = i;
  }

  void add_row(const ZoneId& zone, std::vector<std::optional<double>> cells) {
    if (cells.size() != columns_.size()) throw InputError("covariate row width mismatch for zone " + zone);
    if (!row_index_.emplace(zone, zone_ids_.size()).second)
      throw InputError("covariates: duplicate zone_id '" + zone + "'");
    zone_ids_.push_back(zone);
    cells_.push_back(std::move(cells));
  }

  /// Adds (or replaces) a column; zones missing from `values` get missing cells.
  void set_column(const std::string& name, const std::map<ZoneId, double>& values) {
    std::size_t col;
    if (auto it = column_index_.find(name); it != column_index_.end()) {
      col = it->second;
    } else {
      col = columns_.size();
      columns_.push_back(name);
      column_index_[name] = col;
      for (auto& r : cells_) r.emplace_back();
    }
    for (std::size_t r = 0; r < zone_ids_.size(); ++r) {
      auto it = values.find(zone_ids_[r]);
      cells_[r][col] = it == values.end() ? std::nullopt : std::optional<double>(it->second);
    }
  }

  const std::vector<ZoneId>& zone_ids() const { return zone_ids_; }
  const std::vector<std::string>& columns() const { return columns_; }
  bool has_column(const std::string& name) const { return column_index_.count(name) > 0; }
  bool has_zone(const ZoneId& zone) const { return row_index_.count(zone) > 0; }

  std::optional<double> get(const ZoneId& zone, const std::string& column) const {
    auto r = row_index_.find(zone);
    auto c = column_index_.find(column);
    if (r == row_index_.end() || c == column_index_.end()) return std::nullopt;
    return cells_[r->second][c->second];
  }

  /// Population present and strictly positive.
  bool valid_population(const ZoneId& zone) const {
    auto p = get(zone, "population");
    return p && *p > 0.0;
  }

  csv::Writer to_csv() const {
    std::vector<std::string> header{"zone_id"};
    header.insert(header.end(), columns_.begin(), columns_.end());
    csv::Writer w(header);
    for (std::size_t r = 0; r < zone_ids_.size(); ++r) {
      std::vector<std::string> row{zone_ids_[r]};
      for (const auto& cell : cells_[r]) row.push_back(cell ? format_double(*cell) : "");
      w.row(row);
    }
    return w;
  }

 private:
  std::vector<std::string> columns_;
  std::unordered_map<std::string, std::size_t> column_index_;
  std::vector<ZoneId> zone_ids_;
  std::unordered_map<ZoneId, std::size_t> row_index_;
  std::vector<std::vector<std::optional<double>>> cells_;
};

struct Poi {
  std::string place_id;
  TileId tile;
  std::string category;
};

struct PoiTable {
  std::vector<Poi> rows;
  std::size_t n_outside = 0;  // input points that fell outside the grid
};

/// Region x term popularity matrix plus region -> zone membership.
struct TrendsTable {
  std::vector<std::string> regions;
  std::vector<std::string> terms;
  std::vector<double> values;  // region-major, regions.size() x terms.size()
  std::vector<std::pair<std::string, ZoneId>> region_zones;

  double at(std::size_t region, std::size_t term) const { return values[region * terms.size() + term]; }

  bool is_sparse(std::size_t term) const {
    for (std::size_t r = 0; r < regions.size(); ++r)
      if (at(r, term) != 0.0) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Loaders

inline bool is_missing_cell(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s.empty() || s == "NA" || s == "NaN" || s == "nan";
}

inline ZoneMap load_zone_map(const std::string& path) {
  auto t = csv::read_file(path);
  auto tc = t.require("tile_id"), zc = t.require("zone_id"), wc = t.require("weight");
  std::vector<ZoneMap::Entry> entries;
  entries.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto tile = parse_int(t.rows[r][tc]);
    if (!tile || *tile < 0) throw InputError(t.cell_address(r, tc) + ": bad tile id '" + t.rows[r][tc] + "'");
    if (t.rows[r][zc].empty()) throw InputError(t.cell_address(r, zc) + ": empty zone id");
    entries.push_back({static_cast<TileId>(*tile), t.rows[r][zc], t.number(r, wc)});
  }
  return ZoneMap(std::move(entries));
}

/// Every column except zone_id is numeric; `required` columns must exist.
inline CovariateTable load_covariates(const std::string& path, const std::vector<std::string>& required = {}) {
  auto t = csv::read_file(path);
  auto zc = t.require("zone_id");
  for (const auto& name : required) t.require(name);
  std::vector<std::string> cols;
  std::vector<std::size_t> idx;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == zc) continue;
    cols.push_back(t.header[c]);
    idx.push_back(c);
  }
  CovariateTable table(cols);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<std::optional<double>> cells;
    cells.reserve(idx.size());
    for (auto c : idx) {
      if (is_missing_cell(t.rows[r][c]))
        cells.emplace_back();
      else
        cells.emplace_back(t.number(r, c));
    }
    table.add_row(t.rows[r][zc], std::move(cells));
  }
  return table;
}

/// POIs given either as (place_id, tile_id, category) or (place_id, x, y, category).
inline PoiTable load_pois(const std::string& path, const GridGeometry& grid) {
  auto t = csv::read_file(path);
  auto pc = t.require("place_id"), cc = t.require("category");
  auto tc = t.find("tile_id");
  std::optional<std::size_t> xc, yc;
  if (!tc) {
    xc = t.require("x");
    yc = t.require("y");
  }
  PoiTable out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row[cc].empty()) throw InputError(t.cell_address(r, cc) + ": empty category");
    std::optional<TileId> tile;
    if (tc) {
      auto v = parse_int(row[*tc]);
      if (!v) throw InputError(t.cell_address(r, *tc) + ": bad tile id '" + row[*tc] + "'");
      if (*v >= 0 && static_cast<std::size_t>(*v) < grid.n_tiles()) tile = static_cast<TileId>(*v);
    } else {
      tile = grid.tile_at(t.number(r, *xc), t.number(r, *yc));
    }
    if (!tile) {
      ++out.n_outside;
      continue;
    }
    out.rows.push_back({row[pc], *tile, row[cc]});
  }
  return out;
}

/// trends CSV: region_id + one column per term; region map CSV: region_id,zone_id.
inline TrendsTable load_trends(const std::string& trends_path, const std::string& region_map_path) {
  auto t = csv::read_file(trends_path);
  auto rc = t.require("region_id");
  TrendsTable out;
  std::vector<std::size_t> idx;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != rc) {
      out.terms.push_back(t.header[c]);
      idx.push_back(c);
    }
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (!seen.insert(t.rows[r][rc]).second)
      throw InputError(t.source + ": duplicate region_id '" + t.rows[r][rc] + "'");
    out.regions.push_back(t.rows[r][rc]);
    for (auto c : idx) {
      double v = t.number(r, c);
      if (!(v >= 0.0 && v <= 100.0))
        throw InputError(t.cell_address(r, c) + ": popularity " + t.rows[r][c] + " outside [0,100]");
      out.values.push_back(v);
    }
  }
  auto m = csv::read_file(region_map_path);
  auto mr = m.require("region_id"), mz = m.require("zone_id");
  for (const auto& row : m.rows) {
    if (!seen.count(row[mr])) throw InputError(m.source + ": unknown region_id '" + row[mr] + "'");
    out.region_zones.emplace_back(row[mr], row[mz]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Day files + manifest

struct SeriesManifest {
  std::string service;
  Direction direction = Direction::DL;
  std::vector<std::string> files;  // relative to the manifest directory
};

struct Manifest {
  GridGeometry grid;
  Minutes start{};
  std::vector<SeriesManifest> series;
};

inline Manifest parse_manifest(const nlohmann::json& j) {
  Manifest m;
  try {
    const auto& g = j.at("grid");
    m.grid.origin_x = g.value("origin_x", 0.0);
    m.grid.origin_y = g.value("origin_y", 0.0);
    m.grid.cell_size = g.value("cell_size", 100.0);
    m.grid.n_rows = g.at("n_rows").get<std::size_t>();
    m.grid.n_cols = g.at("n_cols").get<std::size_t>();
    const auto& tm = j.at("time");
    if (tm.value("step_minutes", kSlotMinutes) != kSlotMinutes)
      throw InputError("manifest: step_minutes must be 15");
    m.start = parse_timestamp(tm.at("start").get<std::string>());
    for (const auto& s : j.at("series")) {
      SeriesManifest sm;
      sm.service = s.at("service").get<std::string>();
      sm.direction = parse_direction(s.at("direction").get<std::string>());
      sm.files = s.at("files").get<std::vector<std::string>>();
      if (sm.files.empty()) throw InputError("manifest: series '" + sm.service + "' lists no files");
      m.series.push_back(std::move(sm));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  m.grid.validate();
  return m;
}

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["grid"] = {{"origin_x", m.grid.origin_x},
               {"origin_y", m.grid.origin_y},
               {"cell_size", m.grid.cell_size},
               {"n_rows", m.grid.n_rows},
               {"n_cols", m.grid.n_cols}};
  j["time"] = {{"start", format_timestamp(m.start)}, {"step_minutes", kSlotMinutes}};
  j["series"] = nlohmann::ordered_json::array();
  for (const auto& s : m.series)
    j["series"].push_back({{"service", s.service}, {"direction", to_string(s.direction)}, {"files", s.files}});
  return j;
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest '" + path + "': " + e.what());
  }
  return parse_manifest(j);
}

/// Parses one `tile_id v1 ... v96` file into the columns [day*96, day*96+96) of `values`.
inline void parse_day_file(std::istream& in, const std::string& name, std::size_t n_tiles, std::size_t n_slots,
                           std::size_t day, std::vector<double>& values) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<char> seen(n_tiles, 0);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    auto skip_ws = [&] {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
    };
    auto where = [&] { return name + ":" + std::to_string(lineno); };
    skip_ws();
    unsigned long long tile = 0;
    auto r = std::from_chars(p, end, tile);
    if (r.ec != std::errc{} || (r.ptr < end && *r.ptr != ' ' && *r.ptr != '\t'))
      throw InputError(where() + ": malformed line (bad tile id)");
    p = r.ptr;
    if (tile >= n_tiles)
      throw InputError(where() + ": tile id " + std::to_string(tile) + " outside grid");
    if (seen[tile]) throw InputError(where() + ": duplicate tile id " + std::to_string(tile));
    seen[tile] = 1;
    std::size_t count = 0;
    double* dst = values.data() + tile * n_slots + day * kSlotsPerDay;
    for (;;) {
      skip_ws();
      if (p >= end) break;
      double v = 0.0;
      auto rv = std::from_chars(p, end, v);
      if (rv.ec != std::errc{} || (rv.ptr < end && *rv.ptr != ' ' && *rv.ptr != '\t'))
        throw InputError(where() + ": malformed line (bad value)");
      p = rv.ptr;
      if (!(v >= 0.0) || !std::isfinite(v)) throw InputError(where() + ": negative or non-finite value");
      if (count < kSlotsPerDay) dst[count] = v;
      ++count;
    }
    if (count != kSlotsPerDay)
      throw InputError(where() + ": slot count mismatch (" + std::to_string(count) + " values, expected 96)");
  }
}

/// Loads every series of the manifest; days are concatenated in manifest order.
inline TrafficBundle load_traffic(const std::string& dir_path, const Manifest& manifest, unsigned threads = 1) {
  namespace fs = std::filesystem;
  struct Job {
    std::size_t series;
    std::size_t day;
  };
  std::vector<std::vector<double>> data(manifest.series.size());
  std::vector<Job> jobs;
  const std::size_t n_tiles = manifest.grid.n_tiles();
  for (std::size_t s = 0; s < manifest.series.size(); ++s) {
    data[s].assign(n_tiles * manifest.series[s].files.size() * kSlotsPerDay, 0.0);
    for (std::size_t d = 0; d < manifest.series[s].files.size(); ++d) jobs.push_back({s, d});
  }
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& sm = manifest.series[job.series];
    std::string path = (fs::path(dir_path) / sm.files[job.day]).string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open day file '" + path + "'");
    parse_day_file(in, path, n_tiles, sm.files.size() * kSlotsPerDay, job.day, data[job.series]);
  });
  TrafficBundle bundle;
  for (std::size_t s = 0; s < manifest.series.size(); ++s) {
    const auto& sm = manifest.series[s];
    TimeGrid time{manifest.start, kSlotMinutes, sm.files.size() * kSlotsPerDay};
    bundle.add(ServiceTrafficMatrix(sm.service, sm.direction, manifest.grid, time, std::move(data[s])));
  }
  return bundle;
}

inline TrafficBundle load_traffic(const std::string& manifest_path, unsigned threads = 1) {
  auto manifest = load_manifest(manifest_path);
  auto dir = std::filesystem::path(manifest_path).parent_path().string();
  return load_traffic(dir.empty() ? "." : dir, manifest, threads);
}

/// Serializes one day (slots [day*96, day*96+96)) of a matrix as a day file.
inline std::string format_day_file(const ServiceTrafficMatrix& m, std::size_t day) {
  std::string out;
  out.reserve(m.n_tiles() * kSlotsPerDay * 8);
  for (TileId tile = 0; tile < m.n_tiles(); ++tile) {
    out += std::to_string(tile);
    auto row = m.row(tile).subspan(day * kSlotsPerDay, kSlotsPerDay);
    for (double v : row) {
      out.push_back(' ');
      out += format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

/// Writes `<service>/<YYYYMMDD>_<DL|UL>.txt` files under dir; returns the series manifest entry.
inline SeriesManifest write_day_files(const ServiceTrafficMatrix& m, const std::string& dir) {
  namespace fs = std::filesystem;
  if (m.n_slots() % kSlotsPerDay != 0 || m.time().leading_slots() != 0 || hour_of(m.time().start) != 0)
    throw InputError("day files require a midnight-aligned whole-day time grid");
  SeriesManifest sm{m.service(), m.direction(), {}};
  fs::create_directories(fs::path(dir) / m.service());
  for (std::size_t day = 0; day < m.n_slots() / kSlotsPerDay; ++day) {
    auto rel = m.service() + "/" + format_yyyymmdd(m.time().slot_time(day * kSlotsPerDay)) + "_" +
               to_string(m.direction()) + ".txt";
    std::ofstream f(fs::path(dir) / rel, std::ios::binary);
    if (!f) throw InputError("cannot write day file '" + rel + "'");
    f << format_day_file(m, day);
    sm.files.push_back(rel);
  }
  return sm;
}

}  // namespace trafficlens
