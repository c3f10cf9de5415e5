#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <sstream>

#include "test_util.hpp"
#include "trafficlens/gridio.hpp"

using namespace trafficlens;
using trafficlens::testing::TempDir;

namespace {

std::string day_line(std::size_t tile, std::size_t count, double base = 1.0) {
  std::string s = std::to_string(tile);
  for (std::size_t i = 0; i < count; ++i) s += " " + format_double(base + static_cast<double>(i));
  return s + "\n";
}

nlohmann::json manifest_json(std::size_t rows, std::size_t cols, std::vector<std::string> files,
                             const std::string& start = "2019-03-16T00:00") {
  return {{"grid", {{"n_rows", rows}, {"n_cols", cols}}},
          {"time", {{"start", start}}},
          {"series", {{{"service", "tor"}, {"direction", "DL"}, {"files", files}}}}};
}

std::string expect_input_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected InputError";
  return {};
}

}  // namespace

TEST(Timestamp, RoundTripAndWeekday) {
  auto t = parse_timestamp("2019-03-16T00:00");
  EXPECT_EQ(format_timestamp(t), "2019-03-16T00:00");
  EXPECT_EQ(weekday_of(t), 5);  // Saturday
  EXPECT_EQ(weekday_of(parse_timestamp("2019-03-18T12:30")), 0);
  EXPECT_EQ(hour_of(parse_timestamp("2019-03-18T12:30")), 12);
  EXPECT_EQ(format_yyyymmdd(t), "20190316");
  EXPECT_THROW(parse_timestamp("2019-02-30T00:00"), InputError);
  EXPECT_THROW(parse_timestamp("yesterday"), InputError);
}

TEST(TimeGrid, SlotMapsToWeekdayHour) {
  TimeGrid g{parse_timestamp("2019-03-18T00:00"), 15, 7 * 96};
  g.validate();
  std::vector<int> hits(kHoursPerWeek, 0);
  for (std::size_t t = 0; t < g.n_slots; ++t) ++hits[week_hour_of(g.slot_time(t))];
  for (int h : hits) EXPECT_EQ(h, 4);
  EXPECT_EQ(g.n_hours(), 168u);

  TimeGrid bad{parse_timestamp("2019-03-18T00:10"), 15, 4};
  EXPECT_THROW(bad.validate(), InputError);

  TimeGrid offset{parse_timestamp("2019-03-18T00:30"), 15, 8};
  EXPECT_EQ(offset.leading_slots(), 2u);
  EXPECT_EQ(offset.n_hours(), 3u);
  EXPECT_EQ(offset.hour_bin(0), 0u);
  EXPECT_EQ(offset.hour_bin(2), 1u);
}

TEST(GridGeometry, TileRowColBijection) {
  GridGeometry g{0, 0, 100, 37, 53};
  std::vector<char> seen(g.n_tiles(), 0);
  for (std::size_t r = 0; r < g.n_rows; ++r)
    for (std::size_t c = 0; c < g.n_cols; ++c) {
      auto id = g.tile_id(r, c);
      ASSERT_LT(id, g.n_tiles());
      EXPECT_FALSE(seen[id]);
      seen[id] = 1;
      EXPECT_EQ(g.row_col(id), std::make_pair(r, c));
    }
  for (TileId id = 0; id < g.n_tiles(); ++id) {
    auto [r, c] = g.row_col(id);
    EXPECT_EQ(g.tile_id(r, c), id);
  }
}

TEST(GridGeometry, AffineLookup) {
  GridGeometry g{1000.0, 2000.0, 100.0, 4, 5};
  EXPECT_EQ(g.tile_at(1000.0 + 3 * 100 + 50, 2000.0 + 2 * 100 + 1), g.tile_id(2, 3));
  EXPECT_EQ(g.tile_at(1000.0, 2000.0), 0u);
  EXPECT_FALSE(g.tile_at(999.0, 2000.0));
  EXPECT_FALSE(g.tile_at(1000.0 + 500.0, 2000.0));
  auto [x, y] = g.tile_center(g.tile_id(1, 2));
  EXPECT_EQ(g.tile_at(x, y), g.tile_id(1, 2));
}

TEST(ServiceTrafficMatrix, RejectsNegativeAndWrongShape) {
  GridGeometry g{0, 0, 100, 1, 2};
  TimeGrid t{parse_timestamp("2019-03-18T00:00"), 15, 2};
  EXPECT_THROW(ServiceTrafficMatrix("tor", Direction::DL, g, t, {1, 2, 3}), InputError);
  EXPECT_THROW(ServiceTrafficMatrix("tor", Direction::DL, g, t, {1, 2, -3, 4}), InputError);
  ServiceTrafficMatrix m("tor", Direction::DL, g, t, {1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(m.total(), 10.0);
  EXPECT_DOUBLE_EQ(m.tile_total(1), 7.0);
}

TEST(LoadTraffic, SmallestFile) {
  TempDir dir;
  dir.write("tor/20190316_DL.txt", day_line(0, 96) + day_line(1, 96, 5.0));
  auto bundle = load_traffic(dir.path().string(), parse_manifest(manifest_json(1, 2, {"tor/20190316_DL.txt"})));
  const auto& m = bundle.get("tor", Direction::DL);
  EXPECT_EQ(m.n_tiles(), 2u);
  EXPECT_EQ(m.n_slots(), 96u);
  EXPECT_EQ(m.at(1, 0), 5.0);
  EXPECT_EQ(m.at(0, 95), 96.0);
}

TEST(LoadTraffic, AbsentTilesAreZero) {
  TempDir dir;
  dir.write("d.txt", day_line(2, 96));
  auto bundle = load_traffic(dir.path().string(), parse_manifest(manifest_json(1, 3, {"d.txt"})));
  const auto& m = bundle.get("tor", Direction::DL);
  EXPECT_EQ(m.tile_total(0), 0.0);
  EXPECT_EQ(m.tile_total(1), 0.0);
  EXPECT_GT(m.tile_total(2), 0.0);
}

TEST(LoadTraffic, Errors) {
  TempDir dir;
  auto load = [&](const std::string& text) {
    dir.write("d.txt", text);
    load_traffic(dir.path().string(), parse_manifest(manifest_json(1, 2, {"d.txt"})));
  };
  auto msg = expect_input_error([&] { load(day_line(0, 96) + day_line(1, 95)); });
  EXPECT_NE(msg.find("slot count mismatch"), std::string::npos);
  EXPECT_NE(msg.find("d.txt:2"), std::string::npos);

  msg = expect_input_error([&] { load("0 1 2 x\n"); });
  EXPECT_NE(msg.find("malformed line"), std::string::npos);
  EXPECT_NE(msg.find("d.txt:1"), std::string::npos);

  std::string neg = "0";
  for (int i = 0; i < 96; ++i) neg += i == 40 ? " -1" : " 1";
  msg = expect_input_error([&] { load(neg + "\n"); });
  EXPECT_NE(msg.find("negative"), std::string::npos);

  EXPECT_THROW(load(day_line(0, 96) + day_line(0, 96)), InputError);
  EXPECT_THROW(load(day_line(5, 96)), InputError);
  EXPECT_THROW(load_traffic(dir.path().string(), parse_manifest(manifest_json(1, 2, {"missing.txt"}))), InputError);
}

TEST(LoadTraffic, SeventySevenDays) {
  TempDir dir;
  std::vector<std::string> files;
  auto start = parse_timestamp("2019-03-16T00:00");
  for (int d = 0; d < 77; ++d) {
    auto name = "tor/" + format_yyyymmdd(start + std::chrono::days{d}) + "_DL.txt";
    dir.write(name, day_line(0, 96, d));
    files.push_back(name);
  }
  auto bundle = load_traffic(dir.path().string(), parse_manifest(manifest_json(1, 1, files)), 4);
  const auto& m = bundle.get("tor", Direction::DL);
  EXPECT_EQ(m.n_slots(), 7392u);
  EXPECT_EQ(m.time().n_hours(), 1848u);
  EXPECT_EQ(m.at(0, 76 * 96), 76.0);  // days concatenated in manifest order
}

TEST(LoadTraffic, RoundTripBitExactAndTotals) {
  std::mt19937_64 rng(7);
  const std::size_t rows = 3, cols = 4, days = 3;
  std::vector<double> v(rows * cols * days * 96);
  std::uniform_real_distribution<double> u(0.0, 1e6);
  for (auto& x : v) x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 9) - 4);
  v[5] = 0.0;
  v[7] = 5e-324;
  auto m = trafficlens::testing::make_matrix(rows, cols, days * 96, v, "tor", parse_timestamp("2019-03-16T00:00"));

  TempDir dir;
  Manifest man;
  man.grid = m.grid();
  man.start = m.time().start;
  man.series.push_back(write_day_files(m, dir.path().string()));
  dir.write("manifest.json", manifest_to_json(man).dump(2));
  auto bundle = load_traffic(dir.file("manifest.json"), 2);
  const auto& back = bundle.get("tor", Direction::DL);
  ASSERT_EQ(back.values().size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(back.values()[i], v[i]) << i;

  // total equals the sum of every value written to the files
  long double file_sum = 0.0L;
  for (std::size_t d = 0; d < days; ++d) {
    std::istringstream in(format_day_file(m, d));
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::size_t tile;
      ls >> tile;
      std::string tok;
      while (ls >> tok) file_sum += *parse_double(tok);
    }
  }
  EXPECT_NEAR(back.total(), static_cast<double>(file_sum), 1e-9 * static_cast<double>(file_sum));
  EXPECT_EQ(man.series[0].files.front(), "tor/20190316_DL.txt");
}

TEST(ZoneMapLoad, WeightRules) {
  TempDir dir;
  EXPECT_EQ(load_zone_map(dir.write("a.csv", "tile_id,zone_id,weight\n0,A,1.0\n")).n_zones(), 1u);
  auto split = load_zone_map(dir.write("b.csv", "tile_id,zone_id,weight\n0,A,0.6\n0,B,0.4\n"));
  EXPECT_EQ(split.zones(), (std::vector<ZoneId>{"A", "B"}));
  EXPECT_THROW(load_zone_map(dir.write("c.csv", "tile_id,zone_id,weight\n0,A,0.6\n0,B,0.5\n")), InputError);
  EXPECT_THROW(load_zone_map(dir.write("d.csv", "tile_id,zone_id,weight\n0,A,0.5\n0,A,0.5\n")), InputError);
  EXPECT_THROW(load_zone_map(dir.write("e.csv", "tile_id,zone\n0,A\n")), InputError);
  EXPECT_THROW(load_zone_map(dir.write("f.csv", "tile_id,zone_id,weight\n0,A,0\n")), InputError);
  EXPECT_THROW(split.check_tiles(0), InputError);
}

TEST(CovariateLoad, TableAndGuards) {
  TempDir dir;
  auto t = load_covariates(dir.write("c.csv", "zone_id,population,poverty_rate\nA,100,0.1\nB,0,0.2\nC,50,\n"),
                           {"population"});
  EXPECT_EQ(t.zone_ids().size(), 3u);
  EXPECT_EQ(t.get("A", "population"), 100.0);
  EXPECT_TRUE(t.valid_population("A"));
  EXPECT_FALSE(t.valid_population("B"));
  EXPECT_FALSE(t.get("C", "poverty_rate").has_value());
  EXPECT_FALSE(t.valid_population("Z"));

  auto msg = expect_input_error([&] { load_covariates(dir.write("d.csv", "zone_id,population\nA,1x\n")); });
  EXPECT_NE(msg.find("d.csv:2"), std::string::npos);
  EXPECT_NE(msg.find("population"), std::string::npos);
  msg = expect_input_error([&] { load_covariates(dir.write("e.csv", "zone_id,pop\nA,1\n"), {"population"}); });
  EXPECT_NE(msg.find("missing mandatory column"), std::string::npos);
}

TEST(PoiLoad, TileIdAndCoordinates) {
  TempDir dir;
  GridGeometry g{0, 0, 100, 3, 4};
  auto p = load_pois(dir.write("p.csv", "place_id,x,y,category\na,250,150,school\nb,-5,0,park\nc,399,299,park\n"), g);
  ASSERT_EQ(p.rows.size(), 2u);
  EXPECT_EQ(p.rows[0].tile, g.tile_id(1, 2));
  EXPECT_EQ(p.rows[1].tile, g.tile_id(2, 3));
  EXPECT_EQ(p.n_outside, 1u);

  auto q = load_pois(dir.write("q.csv", "place_id,tile_id,category\na,5,school\nb,12,park\n"), g);
  ASSERT_EQ(q.rows.size(), 1u);
  EXPECT_EQ(q.rows[0].tile, 5u);
  EXPECT_EQ(q.n_outside, 1u);
  EXPECT_THROW(load_pois(dir.write("r.csv", "place_id,tile_id,category\na,1,\n"), g), InputError);
  EXPECT_THROW(load_pois(dir.write("s.csv", "place_id,category\na,park\n"), g), InputError);
}

TEST(TrendsLoad, SparseAndRange) {
  TempDir dir;
  auto t = load_trends(dir.write("t.csv", "region_id,a,b,c\nr1,10,0,5\nr2,20,0,7.5\n"),
                       dir.write("m.csv", "region_id,zone_id\nr1,z1\nr1,z2\nr2,z3\n"));
  EXPECT_EQ(t.terms.size(), 3u);
  EXPECT_FALSE(t.is_sparse(0));
  EXPECT_TRUE(t.is_sparse(1));
  EXPECT_EQ(t.at(1, 2), 7.5);
  EXPECT_EQ(t.region_zones.size(), 3u);
  EXPECT_THROW(load_trends(dir.write("u.csv", "region_id,a\nr1,101\n"), dir.file("m.csv")), InputError);
  EXPECT_THROW(load_trends(dir.file("t.csv"), dir.write("n.csv", "region_id,zone_id\nr9,z1\n")), InputError);
}

TEST(Manifest, RoundTripAndErrors) {
  auto m = parse_manifest(manifest_json(2, 3, {"a.txt", "b.txt"}));
  auto again = parse_manifest(manifest_to_json(m));
  EXPECT_EQ(again.grid, m.grid);
  EXPECT_EQ(again.start, m.start);
  EXPECT_EQ(again.series[0].files, m.series[0].files);
  EXPECT_THROW(parse_manifest(nlohmann::json{{"grid", {{"n_rows", 1}}}}), InputError);
  EXPECT_THROW(parse_manifest(manifest_json(1, 1, {})), InputError);
  auto bad = manifest_json(1, 1, {"a.txt"});
  bad["series"][0]["direction"] = "XX";
  EXPECT_THROW(parse_manifest(bad), InputError);
}
