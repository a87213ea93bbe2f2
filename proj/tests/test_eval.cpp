#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "random_instances.hpp"
#include "timberlens/eval.hpp"

using namespace timberlens;

namespace {

Detection det(std::int64_t image, BBox b, double score) {
  Detection d;
  d.image_id = image;
  d.bbox = b;
  d.score = score;
  return d;
}

GroundTruth gt(std::int64_t image, std::int64_t id, BBox b, bool crowd = false) {
  return {image, id, b, std::nullopt, crowd};
}

}  // namespace

TEST(IouBox, MatchesPixelCount) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> c(0, 20), s(1, 12);
  for (int i = 0; i < 500; ++i) {
    BBox a{double(c(rng)), double(c(rng)), double(s(rng)), double(s(rng))};
    BBox b{double(c(rng)), double(c(rng)), double(s(rng)), double(s(rng))};
    int inter = 0, uni = 0;
    for (int y = 0; y < 40; ++y) {
      for (int x = 0; x < 40; ++x) {
        const bool ia = x >= a.x && x < a.x2() && y >= a.y && y < a.y2();
        const bool ib = x >= b.x && x < b.x2() && y >= b.y && y < b.y2();
        inter += ia && ib;
        uni += ia || ib;
      }
    }
    EXPECT_NEAR(iou_box(a, b), double(inter) / uni, 1e-12);
  }
}

TEST(IouBox, DisjointAndIdentical) {
  EXPECT_EQ(iou_box({0, 0, 10, 10}, {10, 0, 10, 10}), 0.0);
  EXPECT_EQ(iou_box({3, 4, 5, 6}, {3, 4, 5, 6}), 1.0);
  EXPECT_NEAR(iou_box({0, 0, 10, 10}, {5, 0, 10, 10}), 50.0 / 150.0, 1e-15);
}

TEST(Thresholds, Validation) {
  EXPECT_THROW(IouThresholds({}), ValidationError);
  EXPECT_THROW(IouThresholds({0.5, 0.5}), ValidationError);
  EXPECT_THROW(IouThresholds({0.0}), ValidationError);
  EXPECT_THROW(IouThresholds({1.1}), ValidationError);
  const auto c = IouThresholds::canonical();
  ASSERT_EQ(c.size(), 10u);
  EXPECT_DOUBLE_EQ(c.values().front(), 0.5);
  EXPECT_DOUBLE_EQ(c.values().back(), 0.95);
}

TEST(Matching, HigherScoreClaimsFirst) {
  std::vector<GroundTruth> g{gt(0, 1, {0, 0, 10, 10})};
  std::vector<Detection> d{det(0, {1, 0, 10, 10}, 0.4), det(0, {0, 0, 10, 10}, 0.9)};
  const auto m = match_greedy(d, g, 0.5, IouKind::kBox);
  EXPECT_EQ(m.det_state[0][1], MatchState::kTruePositive);
  EXPECT_EQ(m.det_state[0][0], MatchState::kFalsePositive);
  EXPECT_EQ(m.false_negatives[0], 0u);
}

TEST(Matching, PicksHighestIouThenLowerId) {
  std::vector<GroundTruth> g{gt(0, 7, {0, 0, 10, 10}), gt(0, 3, {2, 0, 10, 10})};
  std::vector<Detection> d{det(0, {1, 0, 10, 10}, 0.9)};
  auto m = match_greedy(d, g, 0.5, IouKind::kBox);
  // equal IoU with both: lower GT id wins
  EXPECT_EQ(m.det_gt[0][0], 1);
  d[0].bbox = {0.5, 0, 10, 10};
  m = match_greedy(d, g, 0.5, IouKind::kBox);
  EXPECT_EQ(m.det_gt[0][0], 0);
}

TEST(Matching, CrowdRegionIgnoresDetection) {
  std::vector<GroundTruth> g{gt(0, 1, {0, 0, 100, 100}, true)};
  std::vector<Detection> d{det(0, {10, 10, 5, 5}, 0.9)};
  const auto m = match_greedy(d, g, 0.5, IouKind::kBox);
  EXPECT_EQ(m.det_state[0][0], MatchState::kIgnored);
  const auto r = evaluate_task(d, g, IouThresholds::single(0.5), IouKind::kBox);
  EXPECT_EQ(r.num_gt, 0u);
  EXPECT_FALSE(r.per_threshold[0].ap.has_value());
}

TEST(Ap, NoGroundTruthIsAbsent) {
  std::vector<Detection> d{det(0, {0, 0, 5, 5}, 1.0)};
  EXPECT_FALSE(average_precision(d, {}, 0.5, IouKind::kBox).has_value());
}

TEST(Ap, NoDetectionsIsZero) {
  std::vector<GroundTruth> g{gt(0, 1, {0, 0, 5, 5})};
  EXPECT_EQ(*average_precision({}, g, 0.5, IouKind::kBox), 0.0);
  const auto r = evaluate_task({}, g, IouThresholds::single(0.5), IouKind::kBox);
  EXPECT_EQ(*r.per_threshold[0].recall, 0.0);
}

TEST(Ap, HandComputedCurve) {
  // Two GTs; ranked dets: TP, FP, TP. Precision envelope: 1 up to recall
  // 0.5, then 2/3 up to recall 1.
  std::vector<GroundTruth> g{gt(0, 1, {0, 0, 10, 10}), gt(0, 2, {50, 50, 10, 10})};
  std::vector<Detection> d{det(0, {0, 0, 10, 10}, 0.9), det(0, {80, 80, 5, 5}, 0.8),
                           det(0, {50, 50, 10, 10}, 0.7)};
  const double expected = (51 * 1.0 + 50 * (2.0 / 3.0)) / 101.0;
  EXPECT_NEAR(*average_precision(d, g, 0.5, IouKind::kBox), expected, 1e-12);
  EXPECT_NEAR(*average_recall(d, g, IouThresholds::single(0.5), IouKind::kBox), 1.0, 1e-15);
}

TEST(Ap, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  const auto thr = IouThresholds::canonical();
  for (int trial = 0; trial < 300; ++trial) {
    const auto in = testutil::random_instance(rng);
    const auto res = evaluate_task(in.dets, in.gts, thr, IouKind::kBox);
    for (std::size_t t = 0; t < thr.size(); ++t) {
      const auto o = oracle::evaluate(in.odets, in.ogts, thr.values()[t]);
      if (in.gts.empty()) {
        EXPECT_FALSE(res.per_threshold[t].ap.has_value());
        continue;
      }
      ASSERT_TRUE(res.per_threshold[t].ap.has_value());
      EXPECT_NEAR(*res.per_threshold[t].ap, o.ap, 1e-9) << "trial " << trial << " t " << t;
      EXPECT_NEAR(*res.per_threshold[t].recall, o.recall, 1e-9);
    }
  }
}

TEST(Ap, IndependentOfThreadCount) {
  std::mt19937_64 rng(5);
  const auto in = testutil::random_instance(rng);
  EvalOptions one, many;
  many.threads = 8;
  const auto a = evaluate_task(in.dets, in.gts, IouThresholds::canonical(), IouKind::kBox, one);
  const auto b = evaluate_task(in.dets, in.gts, IouThresholds::canonical(), IouKind::kBox, many);
  ASSERT_EQ(a.per_threshold.size(), b.per_threshold.size());
  for (std::size_t t = 0; t < a.per_threshold.size(); ++t) {
    EXPECT_EQ(a.per_threshold[t].ap, b.per_threshold[t].ap);
    EXPECT_EQ(a.per_threshold[t].curve.interpolated, b.per_threshold[t].curve.interpolated);
  }
}

TEST(Ap, MaxDetsKeepsTopScores) {
  std::vector<GroundTruth> g{gt(0, 1, {0, 0, 10, 10})};
  std::vector<Detection> d{det(0, {40, 40, 5, 5}, 0.9), det(0, {0, 0, 10, 10}, 0.1)};
  EvalOptions o;
  o.max_dets = 1;
  EXPECT_EQ(*average_recall(d, g, IouThresholds::single(0.5), IouKind::kBox, o), 0.0);
  EXPECT_EQ(*average_recall(d, g, IouThresholds::single(0.5), IouKind::kBox), 1.0);
}

TEST(Ap, CocoRecallCapsDetections) {
  std::vector<GroundTruth> g;
  std::vector<Detection> d;
  for (int i = 0; i < 3; ++i) {
    g.push_back(gt(0, i + 1, {20.0 * i, 0, 10, 10}));
    d.push_back(det(0, {20.0 * i, 0, 10, 10}, 1.0 - 0.1 * i));
  }
  EvalOptions o;
  o.recall = RecallConvention::kCocoMaxDets;
  o.coco_max_dets = 2;
  const auto r = evaluate_task(d, g, IouThresholds::single(0.5), IouKind::kBox, o);
  EXPECT_NEAR(*r.per_threshold[0].recall, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(*r.per_threshold[0].ap, 1.0, 1e-12);
}

TEST(Ap, MaskIouUsesRle) {
  Mask a(20, 20), b(20, 20);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) a.at(x, y) = 1;
  for (int y = 0; y < 10; ++y)
    for (int x = 5; x < 15; ++x) b.at(x, y) = 1;
  GroundTruth g = gt(0, 1, {0, 0, 10, 10});
  g.mask = encode_rle(a);
  Detection d = det(0, {0, 0, 10, 10}, 1.0);
  d.mask = encode_rle(b);
  std::vector<GroundTruth> gs{g};
  std::vector<Detection> ds{d};
  // mask IoU = 50 / 150
  EXPECT_EQ(*average_precision(ds, gs, 0.3, IouKind::kMask), 1.0);
  EXPECT_EQ(*average_precision(ds, gs, 0.34, IouKind::kMask), 0.0);
  EXPECT_EQ(*average_precision(ds, gs, 0.9, IouKind::kBox), 1.0);
}

namespace {

DatasetIndex two_image_dataset() {
  DatasetIndex idx;
  idx.categories = {tree_category()};
  idx.images = {{1, "a.png", std::nullopt, 64, 48, std::nullopt}, {2, "b.png", std::nullopt, 64, 48, std::nullopt}};
  AnnotationRecord a;
  a.id = 10;
  a.image_id = 1;
  a.bbox = {4, 4, 10, 20};
  Polygons poly{{4, 4, 14, 4, 14, 24, 4, 24}};
  a.segmentation = poly;
  a.area = 200;
  AnnotationRecord b = a;
  b.id = 11;
  b.image_id = 2;
  b.bbox = {30, 10, 8, 30};
  b.segmentation = Polygons{{30, 10, 38, 10, 38, 40, 30, 40}};
  b.area = 240;
  idx.annotations = {a, b};
  return idx;
}

}  // namespace

TEST(Evaluate, GroundTruthAsPredictionsScoresHundred) {
  const auto idx = two_image_dataset();
  std::vector<Detection> preds;
  for (const auto& a : idx.annotations) {
    Detection d = det(a.image_id, a.bbox, 1.0);
    d.mask = encode_rle(*annotation_mask(a, *idx.find_image(a.image_id)));
    preds.push_back(d);
  }
  const auto s = evaluate(idx, preds);
  for (const auto& v : summary_values(s)) {
    ASSERT_TRUE(v.has_value());
    EXPECT_EQ(*v, 100.0);
  }
}

TEST(Evaluate, MaskMetricsAbsentWithoutPredictedMasks) {
  const auto idx = two_image_dataset();
  std::vector<Detection> preds{det(1, idx.annotations[0].bbox, 1.0)};
  const auto s = evaluate(idx, preds);
  EXPECT_FALSE(s.ap50_seg.has_value());
  EXPECT_NEAR(*s.ar50_bb, 50.0, 1e-9);
}

TEST(Evaluate, UnknownImageIdsAreReported) {
  const auto idx = two_image_dataset();
  std::vector<Detection> preds{det(99, {0, 0, 1, 1}, 1.0), det(7, {0, 0, 1, 1}, 1.0)};
  try {
    evaluate(idx, preds);
    FAIL();
  } catch (const UnknownImageError& e) {
    EXPECT_EQ(e.ids(), (std::vector<std::int64_t>{7, 99}));
  }
}

TEST(Evaluate, SummaryJsonRoundTrip) {
  const auto idx = two_image_dataset();
  std::vector<Detection> preds{det(1, idx.annotations[0].bbox, 0.8), det(2, {0, 0, 5, 5}, 0.9)};
  const auto s = evaluate(idx, preds);
  const auto back = summary_from_json(to_json(s));
  EXPECT_EQ(summary_values(back), summary_values(s));
}

TEST(Evaluate, TableFormat) {
  EvalSummary s;
  s.ap50_bb = 90.4;
  s.ap50_seg = 87.2;
  const std::string t = format_summary_table(s, "model");
  EXPECT_NE(t.find("model | 90.4 | - | 87.2"), std::string::npos) << t;
}

TEST(Detections, JsonRoundTrip) {
  const auto idx = two_image_dataset();
  Detection d = det(1, {1.5, 2.25, 3, 4}, 0.75);
  d.mask = encode_rle(*annotation_mask(idx.annotations[0], idx.images[0]));
  KeypointSet k{};
  k[0] = {3, 4, KeypointFlag::kVisible};
  k[2] = {5.5, 6, KeypointFlag::kOccluded};
  d.keypoints = k;
  std::vector<Detection> v{d};
  const auto back = parse_detections(detections_to_json(v), idx);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], d);
}

TEST(Detections, EveryBadRecordIsListed) {
  const auto idx = two_image_dataset();
  nlohmann::json doc = nlohmann::json::array();
  doc.push_back({{"image_id", 1}, {"category_id", 1}, {"bbox", {0, 0, 1, 1}}, {"score", 0.5}});
  doc.push_back({{"image_id", 1}, {"category_id", 1}, {"bbox", {0, 0, -1, 1}}, {"score", 0.5}});
  doc.push_back({{"image_id", 1}, {"category_id", 1}, {"bbox", {0, 0, 1, 1}}});
  try {
    parse_detections(doc, idx);
    FAIL();
  } catch (const DatasetParseError& e) {
    ASSERT_EQ(e.offenses().size(), 2u);
    EXPECT_EQ(e.offenses()[0].position, 1u);
    EXPECT_EQ(e.offenses()[1].position, 2u);
  }
}
