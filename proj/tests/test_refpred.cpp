#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "random_dataset.hpp"
#include "timberlens/refpred.hpp"

using namespace timberlens;

namespace {

// Many equal-sized instances so that recall statistics are tight.
DatasetIndex grid_dataset(int images, int per_image) {
  DatasetIndex idx;
  idx.categories = {tree_category()};
  std::int64_t id = 1;
  for (int i = 0; i < images; ++i) {
    idx.images.push_back({i + 1, "x.png", std::nullopt, 640, 360, std::nullopt});
    for (int k = 0; k < per_image; ++k) {
      AnnotationRecord a;
      a.id = id++;
      a.image_id = i + 1;
      a.bbox = {10.0 + 60 * k, 20, 30, 200};
      a.area = a.bbox.area();
      a.occlusion_tree = (k % 10) / 10.0;
      idx.annotations.push_back(a);
    }
  }
  return idx;
}

}  // namespace

TEST(Perturb, ZeroNoiseReproducesGroundTruth) {
  std::mt19937_64 rng(3);
  const DatasetIndex idx = testutil::random_dataset(rng, 8);
  const auto a = perturb(idx, {});
  ASSERT_EQ(a.size(), idx.annotations.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ann = idx.annotations[i];
    EXPECT_EQ(a[i].bbox, ann.bbox);
    EXPECT_EQ(a[i].score, 1.0);
    EXPECT_EQ(a[i].keypoints, ann.keypoints);
    if (ann.segmentation) {
      EXPECT_EQ(*a[i].mask, encode_rle(*annotation_mask(ann, *idx.find_image(ann.image_id))));
    }
  }
  EXPECT_EQ(dump_detections(a), dump_detections(perturb(idx, {})));
}

TEST(Perturb, AllDroppedWhenPfnIsOne) {
  std::mt19937_64 rng(4);
  NoiseModel n;
  n.p_fn = 1.0;
  EXPECT_TRUE(perturb(testutil::random_dataset(rng), n).empty());
}

TEST(Perturb, RecallFollowsPfn) {
  const DatasetIndex idx = grid_dataset(200, 10);
  for (double p : {0.1, 0.3, 0.5}) {
    NoiseModel n;
    n.p_fn = p;
    n.seed = 17;
    const double kept = double(perturb(idx, n).size()) / idx.annotations.size();
    const double sigma = std::sqrt(p * (1 - p) / idx.annotations.size());
    EXPECT_NEAR(kept, 1.0 - p, 3 * sigma) << p;
  }
}

TEST(Perturb, DropByOcclusion) {
  const DatasetIndex idx = grid_dataset(400, 10);
  NoiseModel n;
  n.drop_by_occlusion = true;
  const auto out = perturb(idx, n);
  // Mean occlusion is 0.45, so 55 % survive.
  const double kept = double(out.size()) / idx.annotations.size();
  EXPECT_NEAR(kept, 0.55, 3 * std::sqrt(0.25 / idx.annotations.size()));
}

TEST(Perturb, SeedControlsOutput) {
  const DatasetIndex idx = grid_dataset(5, 5);
  NoiseModel a;
  a.sigma_b = 3.0;
  a.seed = 1;
  NoiseModel b = a;
  b.seed = 2;
  EXPECT_EQ(dump_detections(perturb(idx, a)), dump_detections(perturb(idx, a)));
  EXPECT_NE(dump_detections(perturb(idx, a)), dump_detections(perturb(idx, b)));
}

TEST(Perturb, JitteredBoxesStayInImage) {
  const DatasetIndex idx = grid_dataset(20, 10);
  NoiseModel n;
  n.sigma_b = 40.0;
  for (const auto& d : perturb(idx, n)) {
    EXPECT_GE(d.bbox.x, 0.0);
    EXPECT_GE(d.bbox.y, 0.0);
    EXPECT_LE(d.bbox.x2(), 640.0);
    EXPECT_LE(d.bbox.y2(), 360.0);
    EXPECT_GE(d.bbox.w, 1.0);
    EXPECT_GE(d.score, 0.0);
    EXPECT_LE(d.score, 1.0);
  }
}

TEST(Perturb, SpuriousBoxes) {
  const DatasetIndex idx = grid_dataset(400, 0);
  NoiseModel n;
  n.lambda_fp = 2.0;
  n.score_model = ScoreModel::kUniform;
  const auto out = perturb(idx, n);
  const double per_image = double(out.size()) / 400.0;
  EXPECT_NEAR(per_image, 2.0, 3 * std::sqrt(2.0 / 400.0));
  for (const auto& d : out) {
    EXPECT_GE(d.bbox.w, kSpuriousMinSide - 1e-9);
    EXPECT_LE(d.bbox.w, kSpuriousMaxSide + 1e-9);
    EXPECT_LE(d.bbox.x2(), 640.0 + 1e-9);
  }
}

TEST(Perturb, MaskMorphology) {
  std::mt19937_64 rng(5);
  const DatasetIndex idx = testutil::random_dataset(rng, 8);
  NoiseModel n;
  n.mask_px = 1;
  const auto out = perturb(idx, n);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].mask) continue;
    const auto gt = annotation_mask(idx.annotations[i], *idx.find_image(idx.annotations[i].image_id));
    EXPECT_GE(out[i].mask->area(), gt->area());
  }
}

TEST(NoiseModel, Validation) {
  EXPECT_THROW(noise_model_from_json({{"p_fn", 1.5}}), ValidationError);
  EXPECT_THROW(noise_model_from_json({{"sigma", 1}}), ValidationError);
  EXPECT_THROW(noise_model_from_json({{"score_model", "best"}}), ValidationError);
  NoiseModel n;
  n.p_fn = 0.25;
  n.mask_px = -2;
  n.seed = 9;
  const NoiseModel back = noise_model_from_json(to_json(n));
  EXPECT_EQ(back.p_fn, 0.25);
  EXPECT_EQ(back.mask_px, -2);
  EXPECT_EQ(back.seed, 9u);
}

TEST(NaiveDetector, FindsConstantDepthColumns) {
  DepthImage d(200, 120);
  // Receding ground in the lower half, a 10 px wide pole at 4 m.
  for (int y = 0; y < 120; ++y) {
    for (int x = 0; x < 200; ++x) d.at(x, y) = y > 60 ? float(300.0 / (y - 59)) : 0.0f;
  }
  for (int y = 20; y < 100; ++y)
    for (int x = 50; x < 60; ++x) d.at(x, y) = 4.0f;
  const auto dets = naive_depth_detector(d, 1, CameraIntrinsics::for_resolution(200, 120));
  ASSERT_FALSE(dets.empty());
  EXPECT_EQ(dets[0].bbox, (BBox{50, 20, 10, 80}));
  EXPECT_EQ(dets[0].image_id, 1);
}
