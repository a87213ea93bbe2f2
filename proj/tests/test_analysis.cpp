#include <gtest/gtest.h>

#include <random>

#include "timberlens/analysis.hpp"
#include "timberlens/stats.hpp"

using namespace timberlens;

TEST(Stats, AnscombeQuartetOne) {
  // Reference values from the published regression of Anscombe's set I.
  const std::vector<double> x{10, 8, 13, 9, 11, 14, 6, 4, 12, 7, 5};
  const std::vector<double> y{8.04, 6.95, 7.58, 8.81, 8.33, 9.96, 7.24, 4.26, 10.84, 4.82, 5.68};
  const auto f = fit_line(x, y);
  ASSERT_TRUE(f);
  EXPECT_NEAR(f->slope, 0.5001, 1e-4);
  EXPECT_NEAR(f->intercept, 3.0001, 1e-4);
  EXPECT_NEAR(f->slope_se, 0.1179, 1e-4);
  EXPECT_NEAR(f->intercept_se, 1.1247, 1e-4);
  EXPECT_NEAR(f->residual_sd, 1.237, 1e-3);
}

TEST(Stats, DegenerateInputs) {
  const std::vector<double> two{1, 2};
  EXPECT_FALSE(fit_line(two, two).has_value());
  const std::vector<double> flat{3, 3, 3}, y{1, 2, 3};
  EXPECT_FALSE(fit_line(flat, y).has_value());
  EXPECT_THROW(fit_line(two, y), ValidationError);
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
}

TEST(Stats, IntervalCoverage) {
  // Roughly 95 % of slope intervals should cover the true slope.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 1.0);
  int covered = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x, y;
    for (int i = 0; i < 200; ++i) {
      x.push_back(i * 0.05);
      y.push_back(2.0 + 0.7 * x.back() + noise(rng));
    }
    const auto f = *fit_line(x, y);
    covered += f.slope_ci_low() <= 0.7 && 0.7 <= f.slope_ci_high();
  }
  EXPECT_NEAR(covered / double(trials), 0.95, 0.015);
}

TEST(Occlusion, BinEdges) {
  EXPECT_EQ(occlusion_bin(0.0, 10), 0);
  EXPECT_EQ(occlusion_bin(0.0999, 10), 0);
  EXPECT_EQ(occlusion_bin(0.1, 10), 1);
  EXPECT_EQ(occlusion_bin(1.0, 10), 9);
  EXPECT_EQ(occlusion_bin(-0.5, 10), 0);
}

namespace {

DatasetIndex occlusion_fixture() {
  DatasetIndex idx;
  idx.categories = {tree_category()};
  idx.images = {{1, "a.png", std::nullopt, 200, 100, std::nullopt}};
  const double occ[] = {0.05, 0.05, 0.55, 0.55};
  for (int i = 0; i < 4; ++i) {
    AnnotationRecord a;
    a.id = i + 1;
    a.image_id = 1;
    a.bbox = {40.0 * i, 10, 20, 50};
    a.area = a.bbox.area();
    a.occlusion_tree = occ[i];
    if (i < 2) a.occlusion_base = 0.95;
    idx.annotations.push_back(a);
  }
  return idx;
}

}  // namespace

TEST(Occlusion, FalseNegativeRates) {
  const DatasetIndex idx = occlusion_fixture();
  std::vector<Detection> preds;
  for (int i : {0, 2, 3}) {
    Detection d;
    d.image_id = 1;
    d.bbox = idx.annotations[i].bbox;
    preds.push_back(d);
  }
  const auto r = occlusion_fn_rates(idx, preds, 10);
  EXPECT_EQ(r.total_tree, 4u);
  EXPECT_EQ(r.total_base, 2u);
  EXPECT_EQ(r.bins[0].support_tree, 2u);
  EXPECT_DOUBLE_EQ(*r.bins[0].rate_tree(), 0.5);
  EXPECT_DOUBLE_EQ(*r.bins[5].rate_tree(), 0.0);
  EXPECT_DOUBLE_EQ(*r.bins[9].rate_base(), 0.5);
  EXPECT_FALSE(r.bins[3].rate_tree().has_value());
  EXPECT_DOUBLE_EQ(r.bins[9].hi, 1.0);
}

TEST(Occlusion, MissingOcclusionIsValidationError) {
  DatasetIndex idx = occlusion_fixture();
  idx.annotations[1].occlusion_tree.reset();
  EXPECT_THROW(occlusion_fn_rates(idx, {}, 10), ValidationError);
  EXPECT_THROW(occlusion_fn_rates(occlusion_fixture(), {}, 0), ValidationError);
}

TEST(Scaling, ExactSlopeRecovered) {
  std::vector<ScalingPoint> pts;
  for (double n : {125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0}) pts.push_back({n, 70.0 + 1.5 * std::log2(n)});
  const auto f = scaling_fit(pts);
  ASSERT_TRUE(f);
  EXPECT_NEAR(f->slope_per_doubling(), 1.5, 1e-9);
  EXPECT_NEAR(f->intercept(), 70.0, 1e-9);
  EXPECT_NEAR(f->ci95_low(), 1.5, 1e-9);
  const auto band = f->band(1000);
  EXPECT_NEAR(band[0], band[1], 1e-9);
}

TEST(Scaling, SummaryWording) {
  std::vector<ScalingPoint> a, b;
  for (double n : {100.0, 200.0, 400.0, 800.0}) {
    a.push_back({n, 60.0 + 1.1 * std::log2(n)});
    b.push_back({n, 50.0 + 1.6 * std::log2(n)});
  }
  std::vector<ScalingFit> fits{*scaling_fit(a), *scaling_fit(b)};
  EXPECT_EQ(scaling_summary(fits), "AP gains 1.1 to 1.6 % per doubling of the training set");
  EXPECT_EQ(scaling_summary(std::span(fits.data(), 1)),
            "AP gains 1.1 % per doubling of the training set (95 % CI 1.1 to 1.1)");
}

TEST(Scaling, InvalidInput) {
  EXPECT_THROW(scaling_fit({{0.0, 1.0}, {2, 2}, {4, 3}}), ValidationError);
  EXPECT_FALSE(scaling_fit({{1, 1}, {2, 2}}).has_value());
  EXPECT_FALSE(scaling_fit({{4, 1}, {4, 2}, {4, 3}}).has_value());
}

TEST(Scaling, JsonInputForms) {
  const auto j = nlohmann::json::parse(R"([{"n": 100, "ap": 50}, {"n": 200, "ap": 51}])");
  EXPECT_EQ(scaling_points_from_json(j).size(), 2u);
  EXPECT_EQ(scaling_points_from_json(nlohmann::json{{"points", j}}).size(), 2u);
  EXPECT_THROW(scaling_points_from_json(nlohmann::json::parse(R"([{"n": 1}])")), FormatError);
}

TEST(Transfer, ArrowCells) {
  EXPECT_EQ(arrow_cell(49.1, -41.3), "49.1↓41.3");
  EXPECT_EQ(arrow_cell(72.1, 0.1), "72.1↑0.1");
  EXPECT_EQ(arrow_cell(3.1, 0.01), "3.1 0.0");
  EXPECT_EQ(arrow_cell(std::nullopt, 1.0), "-");
  EXPECT_EQ(arrow_cell(12.34, std::nullopt), "12.3");
}

TEST(Transfer, DeltasAndTable) {
  EvalSummary src, tgt;
  src.ap50_bb = 90.4;
  tgt.ap50_bb = 49.1;
  src.ar50_bb = 72.0;
  tgt.ar50_bb = 72.1;
  TransferMeta meta{"SynthTree43k", "CanaTree100", 43000};
  const auto r = transfer_report(src, tgt, meta);
  EXPECT_NEAR(*r.delta[0], -41.3, 1e-9);
  EXPECT_FALSE(r.delta[1].has_value());
  const std::string table = format_transfer_table(std::span(&r, 1));
  EXPECT_NE(table.find("SynthTree43k→CanaTree100 | 43000 | 90.4"), std::string::npos) << table;
  EXPECT_NE(table.find("49.1↓41.3"), std::string::npos);
  EXPECT_NE(table.find("72.1↑0.1"), std::string::npos);
}

TEST(Epochs, SortedStably) {
  std::vector<EpochPoint> pts{{3, 10.0, std::nullopt}, {1, 5.0, 4.0}, {3, 11.0, 2.0}, {2, std::nullopt, 1.0}};
  const auto c = epoch_generalization_curve(pts);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c[0].epoch, 1);
  EXPECT_EQ(c[2].source_ap, 10.0);
  EXPECT_EQ(c[3].source_ap, 11.0);
  EXPECT_EQ(epochs_to_json(c)["points"][1]["source_ap"], nullptr);
}
