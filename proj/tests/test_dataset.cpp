#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "random_dataset.hpp"
#include "timberlens/dataset.hpp"
#include "timberlens/image_io.hpp"

using namespace timberlens;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("timberlens_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json minimal_doc() {
  DatasetIndex idx;
  idx.categories = {tree_category()};
  idx.images = {{1, "a.png", std::nullopt, 10, 8, std::nullopt}};
  return to_json(idx);
}

}  // namespace

TEST(Dataset, WriteParseIdentity) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const DatasetIndex idx = testutil::random_dataset(rng);
    EXPECT_EQ(parse_dataset(json::parse(dump_dataset(idx))), idx);
  }
}

TEST(Dataset, DumpIsOneRecordPerLineAndStable) {
  std::mt19937_64 rng(10);
  const DatasetIndex idx = testutil::random_dataset(rng, 3);
  const std::string a = dump_dataset(idx);
  EXPECT_EQ(a, dump_dataset(parse_dataset(json::parse(a))));
  std::size_t lines = std::count(a.begin(), a.end(), '\n');
  EXPECT_GE(lines, idx.images.size() + idx.annotations.size());
}

TEST(Dataset, FileRoundTrip) {
  std::mt19937_64 rng(12);
  const DatasetIndex idx = testutil::random_dataset(rng);
  const fs::path p = temp_dir("ds") / "a.json";
  write_dataset(idx, p);
  EXPECT_EQ(parse_dataset(p), idx);
}

TEST(Dataset, MissingFileIsIoError) {
  EXPECT_THROW(parse_dataset(fs::path("/nonexistent/x.json")), IoError);
}

TEST(Dataset, LenientReportAccountsForEveryRecord) {
  json doc = minimal_doc();
  doc["images"].push_back({{"id", 2}, {"file_name", "b.png"}, {"width", 0}, {"height", 8}});
  doc["images"].push_back({{"id", 1}, {"file_name", "dup.png"}, {"width", 5}, {"height", 5}});
  doc["annotations"] = {
      {{"id", 1}, {"image_id", 1}, {"category_id", 1}, {"bbox", {0, 0, 2, 2}}},
      {{"id", 2}, {"image_id", 5}, {"category_id", 1}, {"bbox", {0, 0, 2, 2}}},
      {{"id", 3}, {"image_id", 1}, {"category_id", 1}, {"bbox", {0, 0, 2, 2}}, {"keypoints", {1, 2, 2}}},
      {{"id", 4},
       {"image_id", 1},
       {"category_id", 1},
       {"bbox", {0, 0, 2, 2}},
       {"keypoints", {0, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
  };
  const ParseResult r = parse_dataset_report(doc);
  EXPECT_EQ(r.index.images.size() + std::count_if(r.rejected.begin(), r.rejected.end(),
                                                   [](const ParseOffense& o) { return o.kind == "image"; }),
            r.input_images);
  EXPECT_EQ(r.index.annotations.size(), 1u);
  EXPECT_EQ(r.input_annotations, 4u);
  std::set<std::string> reasons;
  for (const auto& o : r.rejected) reasons.insert(o.reason);
  EXPECT_TRUE(std::any_of(reasons.begin(), reasons.end(),
                          [](const std::string& s) { return s.find("dangling image_id") != std::string::npos; }));
  EXPECT_TRUE(std::any_of(reasons.begin(), reasons.end(),
                          [](const std::string& s) { return s.find("keypoint arity") != std::string::npos; }));
  EXPECT_TRUE(std::any_of(reasons.begin(), reasons.end(),
                          [](const std::string& s) { return s.find("flag") != std::string::npos; }));
  EXPECT_TRUE(std::any_of(reasons.begin(), reasons.end(),
                          [](const std::string& s) { return s.find("duplicate id") != std::string::npos; }));
  EXPECT_THROW(parse_dataset(doc), DatasetParseError);
}

TEST(Dataset, StrictParseListsAllOffenses) {
  json doc = minimal_doc();
  doc["annotations"] = {{{"id", 1}, {"image_id", 9}, {"category_id", 1}, {"bbox", {0, 0, 2, 2}}},
                        {{"id", 2}, {"image_id", 1}, {"category_id", 1}, {"bbox", {0, 0, 0, 2}}}};
  try {
    parse_dataset(doc);
    FAIL();
  } catch (const DatasetParseError& e) {
    EXPECT_EQ(e.offenses().size(), 2u);
    for (const auto& o : e.offenses()) EXPECT_EQ(o.kind, "annotation");
  }
}

TEST(Dataset, BoxesAreClippedOnWrite) {
  DatasetIndex idx;
  idx.categories = {tree_category()};
  idx.images = {{1, "a.png", std::nullopt, 10, 8, std::nullopt}};
  AnnotationRecord a;
  a.id = 1;
  a.image_id = 1;
  a.bbox = {-2, 5, 6, 10};
  a.area = 12;
  idx.annotations = {a};
  const auto back = parse_dataset(to_json(idx));
  EXPECT_EQ(back.annotations[0].bbox, (BBox{0, 5, 4, 3}));
}

TEST(Dataset, AreaDefaultsToMaskPixels) {
  json doc = minimal_doc();
  doc["annotations"] = {{{"id", 1},
                         {"image_id", 1},
                         {"category_id", 1},
                         {"bbox", {1, 1, 4, 3}},
                         {"segmentation", {{1, 1, 5, 1, 5, 4, 1, 4}}}}};
  const auto idx = parse_dataset(doc);
  EXPECT_EQ(idx.annotations[0].area, 12.0);
}

TEST(Dataset, CompressedRleSegmentation) {
  json doc = minimal_doc();
  Mask m(10, 8);
  m.at(3, 2) = m.at(3, 3) = m.at(4, 3) = 1;
  doc["annotations"] = {{{"id", 1},
                         {"image_id", 1},
                         {"category_id", 1},
                         {"bbox", {3, 2, 2, 2}},
                         {"segmentation", {{"size", {8, 10}}, {"counts", rle_to_string(encode_rle(m))}}}}};
  const auto idx = parse_dataset(doc);
  EXPECT_EQ(*annotation_mask(idx.annotations[0], idx.images[0]), m);
  EXPECT_EQ(idx.annotations[0].area, 3.0);
}

TEST(Folds, DisjointCoverSixtyTwentyTwenty) {
  std::mt19937_64 rng(1);
  DatasetIndex idx;
  for (int i = 0; i < 100; ++i) idx.images.push_back({i, "x", std::nullopt, 4, 4, std::nullopt});
  const auto folds = make_folds(idx, 5, 42);
  ASSERT_EQ(folds.size(), 5u);
  std::multiset<std::int64_t> tested;
  for (const auto& f : folds) {
    EXPECT_EQ(f.train_ids.size(), 60u);
    EXPECT_EQ(f.val_ids.size(), 20u);
    EXPECT_EQ(f.test_ids.size(), 20u);
    std::set<std::int64_t> all(f.train_ids.begin(), f.train_ids.end());
    all.insert(f.val_ids.begin(), f.val_ids.end());
    all.insert(f.test_ids.begin(), f.test_ids.end());
    EXPECT_EQ(all.size(), 100u);
    tested.insert(f.test_ids.begin(), f.test_ids.end());
  }
  EXPECT_EQ(std::set<std::int64_t>(tested.begin(), tested.end()).size(), 100u);
  EXPECT_EQ(tested.size(), 100u);
  EXPECT_EQ(make_folds(idx, 5, 42)[2].test_ids, folds[2].test_ids);
  EXPECT_NE(make_folds(idx, 5, 43)[0].test_ids, folds[0].test_ids);
  EXPECT_THROW(make_folds(idx, 2, 0), ValidationError);
}

TEST(Depth, MillimetreCoding) {
  EXPECT_EQ(depth_to_millimeters(1.2345), 1235);
  EXPECT_EQ(depth_to_millimeters(0.0), 0);
  EXPECT_EQ(depth_to_millimeters(-3.0), 0);
  EXPECT_EQ(depth_to_millimeters(std::numeric_limits<double>::infinity()), 0);
  EXPECT_EQ(depth_to_millimeters(1000.0), kMaxDepthMillimeters);
}

TEST(Depth, PngRoundTripIsByteIdentical) {
  const fs::path dir = temp_dir("depth");
  std::mt19937_64 rng(4);
  DepthImage d(37, 21);
  for (auto& v : d.meters) v = std::uniform_int_distribution<int>(0, 20000)(rng) / 1000.0f;
  write_depth(dir / "a.png", d);
  const DepthImage back = read_depth(dir / "a.png");
  ASSERT_EQ(back.width, 37);
  for (std::size_t i = 0; i < d.meters.size(); ++i) EXPECT_NEAR(back.meters[i], d.meters[i], 5e-4);
  write_depth(dir / "b.png", back);
  EXPECT_EQ(read_text_file(dir / "a.png"), read_text_file(dir / "b.png"));
}

TEST(Depth, RejectsRgbPng) {
  const fs::path dir = temp_dir("rgb");
  RgbImage img(4, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 7);
  write_rgb(dir / "c.png", img);
  EXPECT_EQ(read_rgb(dir / "c.png").pixels, img.pixels);
  EXPECT_THROW(read_depth(dir / "c.png"), FormatError);
  EXPECT_THROW(read_depth(dir / "missing.png"), IoError);
}
