#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace timberlens {

/// Metric depth, row-major. 0 marks a missing sample (no return / sky).
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> meters;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), meters(static_cast<std::size_t>(w) * h, 0.0f) {}

  float at(int x, int y) const { return meters[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return meters[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool valid(int x, int y) const { return contains(x, y) && at(x, y) > 0.0f; }
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
};

inline constexpr std::uint16_t kMaxDepthMillimeters = 65534;

/// Meters to the on-disk millimetre code: non-finite or non-positive values
/// become 0, anything past 65.534 m saturates.
std::uint16_t depth_to_millimeters(double meters);

/// 16-bit single-channel PNG in millimetres. Throws FormatError if the file
/// is not 16-bit grayscale, IoError on filesystem failures.
DepthImage read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthImage& depth);

RgbImage read_rgb(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const RgbImage& image);

}  // namespace timberlens
