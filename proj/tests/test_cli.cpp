#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"
#include "trafficlens/cli.hpp"

using namespace trafficlens;
using trafficlens::testing::read_file;
using trafficlens::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::vector<const char*> argv{"trafficlens"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string small_config(const TempDir& dir, const std::string& covariates = R"(["poverty_rate"])",
                         const std::string& extra = "", const std::string& name = "run.json") {
  return dir.write(name, R"({
  "output_dir": "out",
  "seed": 17,
  "synth": {"n_zones": 40, "tiles_per_zone": 2, "n_days": 7, "gt_link": {"slope": 15}},
  "regress": {"covariates": )" + covariates + R"(},
  "hotspots": {"q": 0.5, "min_count": 3}
  )" + extra + "}");
}

void expect_ok(const Run& r) { EXPECT_EQ(r.code, 0) << r.err; }

}  // namespace

TEST(Cli, FullChainAndCsvRoundTrip) {
  TempDir dir;
  auto cfg = small_config(dir);
  expect_ok(run({"synth", "--config", cfg}));
  expect_ok(run({"estimate", "--config", cfg}));
  expect_ok(run({"validate", "--config", cfg}));
  expect_ok(run({"pca", "--config", cfg}));
  auto pc_cfg = small_config(dir, R"(["poverty_rate", "PC1", "PC3"])",
                             R"(, "inputs": {"pc_scores": "out/pc_scores.csv"})", "pc.json");
  expect_ok(run({"regress", "--config", pc_cfg}));
  expect_ok(run({"hotspots", "--config", cfg}));
  expect_ok(run({"heatmap", "--config", cfg}));
  expect_ok(run({"heatmap", "--config", cfg, "--service", "web_adult", "--zones", "top10cpc"}));
  expect_ok(run({"export", "--config", cfg}));

  auto out = dir.path() / "out";
  auto est = estimator::load_estimates((out / "estimates.csv").string());
  EXPECT_EQ(est.size(), 40u);
  auto written = estimator::estimates_csv(est).str();
  EXPECT_EQ(written, read_file((out / "estimates.csv").string()));

  for (const char* name : {"diagnostics.csv", "validate_correlations.csv", "validate_tests.csv", "regress.csv",
                           "regress_summary.csv", "pc_scores.csv", "pc_scores_loadings.csv", "pc_scores_explained.csv",
                           "poi_stats.csv", "poi_stats_tiles.csv", "heatmap_tor.csv", "heatmap_tor_normalized.csv",
                           "heatmap_web_adult.csv"}) {
    auto path = (out / name).string();
    ASSERT_TRUE(std::filesystem::exists(path)) << name;
    auto t = csv::read_file(path);
    EXPECT_FALSE(t.rows.empty()) << name;
    csv::Writer w(t.header);
    for (const auto& row : t.rows) w.row(row);
    EXPECT_EQ(w.str(), read_file(path)) << name;
  }
  auto pcs = load_covariates((out / "pc_scores.csv").string(), {"PC1", "PC2", "PC3"});
  EXPECT_EQ(pcs.zone_ids().size(), 40u);
  auto heat = csv::read_file((out / "heatmap_tor_normalized.csv").string());
  double mx = 0.0;
  for (std::size_t r = 0; r < heat.rows.size(); ++r)
    for (std::size_t c = 0; c < heat.header.size(); ++c) mx = std::max(mx, heat.number(r, c));
  EXPECT_EQ(mx, 1.0);
  auto geo = nlohmann::json::parse(read_file((out / "estimates.geojson").string()));
  EXPECT_EQ(geo["features"].size(), 40u);
  EXPECT_NE(read_file((out / "regress_table.txt").string()).find("log_cpc"), std::string::npos);
}

TEST(Cli, OutputsIndependentOfThreads) {
  TempDir a, b;
  for (auto* d : {&a, &b}) {
    auto cfg = small_config(*d);
    const std::string threads = d == &a ? "1" : "4";
    for (const char* cmd : {"synth", "estimate", "validate", "regress", "heatmap"}) {
      auto r = run({cmd, "--config", cfg, "--threads", threads});
      ASSERT_EQ(r.code, 0) << cmd << ": " << r.err;
    }
  }
  for (const char* name : {"estimates.csv", "diagnostics.csv", "validate_correlations.csv", "validate_tests.csv",
                           "regress.csv", "regress_table.txt", "heatmap_tor.csv", "synth/tor/20190316_DL.txt", "synth/covariates.csv"})
    EXPECT_EQ(read_file((a.path() / "out" / name).string()), read_file((b.path() / "out" / name).string())) << name;
}

TEST(Cli, OverridesAndLag) {
  TempDir dir;
  auto cfg = small_config(dir);
  expect_ok(run({"synth", "--config", cfg, "--seed", "3", "--out", dir.file("bundle")}));
  EXPECT_TRUE(std::filesystem::exists(dir.file("bundle/manifest.json")));
  auto cfg2 = dir.write("run2.json", R"({"output_dir": "o2", "data_dir": "bundle", "estimate": {"lag_hours": 1}})");
  expect_ok(run({"estimate", "--config", cfg2, "--lag-hours", "2", "--priors", "0.02,0.5,0.5", "--epsilon", "0.001",
                 "--out", dir.file("o2/e.csv")}));
  auto est = estimator::load_estimates(dir.file("o2/e.csv"));
  for (const auto& r : est) {
    EXPECT_NEAR(r.c, 0.02 * 0.5 * r.rho_prime, 1e-15);
    if (r.rho <= 0) EXPECT_EQ(r.rho_prime, 0.001);
  }
  auto log = run({"estimate", "--config", cfg2});
  EXPECT_NE(log.out.find("lag 1 h"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"estimate", "--bogus"}).code, 2);
  EXPECT_EQ(run({"synth", "--help"}).code, 0);
  EXPECT_EQ(run({"estimate", "--config", dir.file("missing.json")}).code, 2);
  EXPECT_EQ(run({"estimate", "--config", dir.write("bad.json", "{not json")}).code, 2);

  auto alpha1 = dir.write("a1.json", R"({"output_dir": "x", "synth": {"n_zones": 3, "alpha": [0.2, 1.0, 0.1]}})");
  auto r = run({"synth", "--config", alpha1});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("alpha"), std::string::npos);

  auto cfg = small_config(dir);
  ASSERT_EQ(run({"synth", "--config", cfg}).code, 0);
  // no estimates yet
  EXPECT_EQ(run({"validate", "--config", cfg}).code, 2);
  ASSERT_EQ(run({"estimate", "--config", cfg}).code, 0);
  EXPECT_EQ(run({"heatmap", "--config", cfg, "--service", "nope"}).code, 2);
  EXPECT_EQ(run({"heatmap", "--config", cfg, "--zones", "some"}).code, 2);
  EXPECT_EQ(run({"hotspots", "--config", cfg, "--q", "1.5"}).code, 2);
  EXPECT_EQ(run({"pca", "--config", cfg, "--k", "12"}).code, 2);
  EXPECT_EQ(run({"estimate", "--config", cfg, "--priors", "0.1,0.2"}).code, 2);
  EXPECT_EQ(run({"regress", "--config", cfg, "--hc", "HC9"}).code, 2);

  // population and pop_density are exactly proportional in synthetic bundles
  auto collinear = small_config(dir, R"(["population", "pop_density"])", "", "collinear.json");
  r = run({"regress", "--config", collinear});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("pop_density"), std::string::npos);

  auto geom = dir.write("geom.json", R"({"type": "FeatureCollection", "features": [
    {"type": "Feature", "properties": {"zone_id": "nowhere"},
     "geometry": {"type": "Point", "coordinates": [0, 0]}}]})");
  r = run({"export", "--config", cfg, "--geometry", geom});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nowhere"), std::string::npos);
}

TEST(Cli, ConfigParsing) {
  auto c = cli::parse_config(nlohmann::json::parse(R"({
    "output_dir": "res", "threads": 3,
    "inputs": {"manifest": "/abs/m.json", "zone_map": "rel/z.csv"},
    "services": {"reference": "adult", "carrier": "onion", "control": ["a", "b"]},
    "estimate": {"lag_hours": -2, "epsilon": 0.01, "priors": [0.1, 0.2, 0.3]},
    "regress": {"covariates": ["x"], "extra_covariates": ["drug_abuse_rate"], "hc_type": "HC0",
                "exclude_zero_groundtruth": true},
    "synth": {"n_zones": 9, "noise": {"sigma": 0.5}, "lag_hours": 2}
  })"),
                                 "/base");
  EXPECT_EQ(c.output_dir, std::filesystem::path("/base/res"));
  EXPECT_EQ(c.manifest_path(), std::filesystem::path("/abs/m.json"));
  EXPECT_EQ(c.zone_map_path(), std::filesystem::path("/base/rel/z.csv"));
  EXPECT_EQ(c.covariates_path(), std::filesystem::path("/base/res/synth/covariates.csv"));
  EXPECT_EQ(c.threads, 3u);
  EXPECT_EQ(c.estimate.reference_service, "adult");
  EXPECT_EQ(c.control_services, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(c.estimate.lag_hours, -2);
  EXPECT_EQ(c.estimate.priors.csam_share, 0.3);
  EXPECT_EQ(c.regress.hc, stats::HcType::HC0);
  EXPECT_TRUE(c.regress.exclude_zero_groundtruth);
  EXPECT_EQ(c.synth.n_zones, 9u);
  EXPECT_EQ(c.synth.noise.sigma, 0.5);
  EXPECT_EQ(c.synth.lag_hours, 2);
  EXPECT_THROW(cli::parse_config(nlohmann::json::parse(R"({"estimate": {"priors": [0.1, 0.2]}})"), "/"), InputError);
  EXPECT_THROW(cli::parse_config(nlohmann::json::parse(R"({"estimate": {"priors": [0.1, 0.2, 1.5]}})"), "/"),
               InputError);
  EXPECT_THROW(cli::parse_config(nlohmann::json::parse(R"({"threads": "many"})"), "/"), InputError);
}
