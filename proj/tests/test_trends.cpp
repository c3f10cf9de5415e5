#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"
#include "trafficlens/synthgen.hpp"
#include "trafficlens/trends.hpp"

using namespace trafficlens;
using namespace trafficlens::trends;

namespace {

TrendsTable table(std::vector<std::string> regions, std::vector<std::string> terms, std::vector<double> values) {
  TrendsTable t;
  t.regions = std::move(regions);
  t.terms = std::move(terms);
  t.values = std::move(values);
  return t;
}

}  // namespace

TEST(PrepareTrends, EighteenTermsSevenSparse) {
  synth::SynthSpec spec;
  spec.n_zones = 60;
  auto b = synth::generate(spec);
  ASSERT_EQ(b.trends.terms.size(), 18u);
  auto res = prepare_trends(b.trends, 3);
  EXPECT_EQ(res.kept_terms.size(), 11u);
  EXPECT_EQ(res.dropped_terms.size(), 7u);
  EXPECT_EQ(res.kept_terms.size() + res.dropped_terms.size(), b.trends.terms.size());
  EXPECT_EQ(res.pca.loadings.rows(), 11u);
  EXPECT_EQ(res.pca.loadings.cols(), 3u);
  EXPECT_EQ(res.zone_scores.size(), 60u);
  for (std::size_t i = 1; i < 3; ++i) EXPECT_LE(res.pca.explained_variance[i], res.pca.explained_variance[i - 1]);
}

TEST(PrepareTrends, BroadcastIsIdenticalWithinRegion) {
  auto t = table({"r1", "r2", "r3"}, {"a", "b"}, {1, 5, 3, 2, 8, 9});
  t.region_zones = {{"r1", "z1"}, {"r1", "z2"}, {"r2", "z3"}, {"r3", "z4"}, {"r1", "z5"}};
  auto res = prepare_trends(t, 2);
  EXPECT_EQ(res.zone_scores.at("z1"), res.zone_scores.at("z2"));
  EXPECT_EQ(res.zone_scores.at("z1"), res.zone_scores.at("z5"));
  EXPECT_NE(res.zone_scores.at("z1"), res.zone_scores.at("z3"));
  for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(res.zone_scores.at("z4")[c], res.pca.scores(2, c));
}

TEST(PrepareTrends, SparseTermDoesNotChangeScores) {
  auto base = table({"r1", "r2", "r3", "r4"}, {"a", "b", "c"}, {1, 5, 3, 2, 8, 9, 4, 4, 1, 7, 2, 6});
  auto padded = table({"r1", "r2", "r3", "r4"}, {"a", "zero", "b", "c"},
                      {1, 0, 5, 3, 2, 0, 8, 9, 4, 0, 4, 1, 7, 0, 2, 6});
  base.region_zones = padded.region_zones = {{"r1", "z1"}, {"r2", "z2"}, {"r3", "z3"}, {"r4", "z4"}};
  auto a = prepare_trends(base, 3);
  auto b = prepare_trends(padded, 3);
  EXPECT_EQ(b.dropped_terms, std::vector<std::string>{"zero"});
  EXPECT_EQ(a.kept_terms, b.kept_terms);
  for (const auto& [z, s] : a.zone_scores)
    for (std::size_t c = 0; c < s.size(); ++c) EXPECT_EQ(s[c], b.zone_scores.at(z)[c]);
}

TEST(PrepareTrends, PerfectlyCorrelatedTerms) {
  auto t = table({"r1", "r2"}, {"a", "b"}, {10, 20, 30, 60});
  auto res = prepare_trends(t, 1);
  EXPECT_NEAR(res.pca.explained_ratio[0], 1.0, 1e-12);
}

TEST(PrepareTrends, Errors) {
  auto same = table({"r1", "r2", "r3"}, {"a", "b"}, {4, 5, 4, 5, 4, 5});
  EXPECT_THROW(prepare_trends(same, 1), NumericError);
  auto one_region = table({"r1"}, {"a", "b"}, {1, 2});
  EXPECT_THROW(prepare_trends(one_region, 1), InputError);
  auto sparse = table({"r1", "r2"}, {"a", "b", "c"}, {0, 1, 0, 0, 2, 0});
  EXPECT_THROW(prepare_trends(sparse, 1), InputError);
  auto ok = table({"r1", "r2", "r3"}, {"a", "b", "c"}, {1, 2, 3, 3, 1, 2, 2, 3, 7});
  EXPECT_THROW(prepare_trends(ok, 4), InputError);
  EXPECT_NO_THROW(prepare_trends(ok, 3));
  ok.region_zones = {{"r1", "z1"}, {"r2", "z1"}};
  EXPECT_THROW(prepare_trends(ok, 2), InputError);
}

TEST(PrepareTrends, CsvOutputsRoundTrip) {
  synth::SynthSpec spec;
  spec.n_zones = 40;
  auto b = synth::generate(spec);
  auto res = prepare_trends(b.trends, 3);
  trafficlens::testing::TempDir dir;
  zone_scores_csv(res).save(dir.file("s.csv"));
  auto back = load_covariates(dir.file("s.csv"), {"PC1", "PC2", "PC3"});
  for (const auto& [z, s] : res.zone_scores) {
    EXPECT_EQ(*back.get(z, "PC1"), s[0]);
    EXPECT_EQ(*back.get(z, "PC3"), s[2]);
  }
  std::istringstream ls(loadings_csv(res).str()), es(explained_csv(res).str());
  auto load = csv::parse(ls, "l");
  EXPECT_EQ(load.rows.size(), 11u);
  auto expl = csv::parse(es, "e");
  EXPECT_EQ(expl.rows.size(), 3u);
}
