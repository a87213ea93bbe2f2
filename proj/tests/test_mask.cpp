#include <gtest/gtest.h>

#include <random>

#include "timberlens/mask.hpp"

using namespace timberlens;

namespace {

Mask random_mask(std::mt19937_64& rng, int w, int h) {
  Mask m(w, h);
  std::bernoulli_distribution p(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  for (auto& v : m.data) v = p(rng);
  return m;
}

}  // namespace

TEST(Rle, RoundTripRandomMasks) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dim(1, 24);
  for (int i = 0; i < 2000; ++i) {
    const Mask m = random_mask(rng, dim(rng), dim(rng));
    const Rle r = encode_rle(m);
    EXPECT_EQ(decode_rle(r, m.width, m.height), m);
    EXPECT_EQ(r.area(), m.area());
    EXPECT_EQ(rle_from_string(rle_to_string(r), r.height, r.width), r);
  }
}

TEST(Rle, ColumnMajorStartingWithBackground) {
  Mask m(2, 2);
  m.at(0, 0) = 1;  // first pixel set: leading zero-length background run
  m.at(1, 1) = 1;
  const Rle r = encode_rle(m);
  EXPECT_EQ(r.counts, (std::vector<std::uint32_t>{0, 1, 2, 1}));
}

TEST(Rle, KnownCompressedString) {
  // Fourth run is delta-coded against the second: 1 - 1 = 0.
  Rle r{2, 2, {0, 1, 2, 1}};
  EXPECT_EQ(rle_to_string(r), "0120");
  Rle big{100, 100, {5000, 5000}};
  EXPECT_EQ(rle_from_string(rle_to_string(big), 100, 100), big);
}

TEST(Rle, BadLengthsThrow) {
  Rle r{2, 2, {1, 1}};
  EXPECT_THROW(decode_rle(r, 2, 2), FormatError);
}

TEST(Iou, RleMatchesDense) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const Mask a = random_mask(rng, 13, 9), b = random_mask(rng, 13, 9);
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < a.data.size(); ++k) {
      inter += a.data[k] && b.data[k];
      uni += a.data[k] || b.data[k];
    }
    const double want = uni ? double(inter) / uni : 0.0;
    EXPECT_NEAR(iou_mask(a, b), want, 1e-12);
    EXPECT_NEAR(iou_rle(encode_rle(a), encode_rle(b)), want, 1e-12);
    EXPECT_EQ(intersection_rle(encode_rle(a), encode_rle(b)), inter);
  }
}

TEST(Iou, DimensionMismatchThrows) {
  EXPECT_THROW(iou_mask(Mask(2, 2), Mask(3, 2)), ValidationError);
  EXPECT_EQ(iou_mask(Mask(2, 2), Mask(2, 2)), 0.0);
}

TEST(Polygon, RectangleCoversPixelCentres) {
  std::vector<std::vector<double>> p{{2, 1, 7, 1, 7, 4, 2, 4}};
  const Mask m = rasterize_polygons(p, 10, 6);
  EXPECT_EQ(m.area(), 15u);
  const auto b = mask_bbox(m);
  ASSERT_TRUE(b.has_value());
  EXPECT_EQ(*b, (BBox{2, 1, 5, 3}));
}

TEST(Polygon, MatchesPointInPolygonOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> c(0.0, 30.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> poly;
    for (int i = 0; i < 6; ++i) {
      poly.push_back(c(rng));
      poly.push_back(c(rng));
    }
    const std::vector<std::vector<double>> polys{poly};
    const Mask m = rasterize_polygons(polys, 30, 30);
    for (int y = 0; y < 30; ++y) {
      for (int x = 0; x < 30; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        bool in = false;
        for (std::size_t i = 0, j = 5; i < 6; j = i++) {
          const double xi = poly[2 * i], yi = poly[2 * i + 1], xj = poly[2 * j], yj = poly[2 * j + 1];
          if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) in = !in;
        }
        EXPECT_EQ(m.at(x, y), in ? 1 : 0) << trial << " " << x << "," << y;
      }
    }
  }
}

TEST(Morph, DilateErodeSquare) {
  Mask m(11, 11);
  m.at(5, 5) = 1;
  const Mask d = morph(m, 2);
  EXPECT_EQ(d.area(), 25u);
  EXPECT_EQ(morph(d, -2), m);
  EXPECT_EQ(morph(m, 0), m);
}

TEST(Bbox, EmptyMaskHasNoBox) { EXPECT_FALSE(mask_bbox(Mask(4, 4)).has_value()); }
