#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "timberlens/common.hpp"

namespace timberlens {

/// Dense binary mask, row-major, one byte per pixel (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t area() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Uncompressed COCO run-length encoding. Runs are taken column-major and
/// alternate background/foreground, always starting with a background run
/// (which may be zero-length).
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  std::size_t area() const;
  friend bool operator==(const Rle&, const Rle&) = default;
};

Rle encode_rle(const Mask& mask);

/// Throws FormatError when the run lengths do not sum to width * height.
Mask decode_rle(const Rle& rle, int width, int height);

/// COCO compressed-string form of the counts (the LEB128-like scheme used by
/// pycocotools, with runs after the second delta-coded against i - 2).
std::string rle_to_string(const Rle& rle);
Rle rle_from_string(std::string_view s, int height, int width);

/// Even-odd fill of one or more polygons (flat x0,y0,x1,y1,... lists) sampled
/// at pixel centres (i + 0.5, j + 0.5).
Mask rasterize_polygons(std::span<const std::vector<double>> polygons, int width, int height);

/// |a & b| / |a | b|; 0 when both are empty. Throws ValidationError on a
/// dimension mismatch.
double iou_mask(const Mask& a, const Mask& b);
double iou_rle(const Rle& a, const Rle& b);
std::size_t intersection_rle(const Rle& a, const Rle& b);

/// Tight hull of the set pixels, nullopt for an empty mask.
std::optional<BBox> mask_bbox(const Mask& mask);

/// Square-element morphology; positive radius dilates, negative erodes.
Mask morph(const Mask& mask, int radius);

}  // namespace timberlens
