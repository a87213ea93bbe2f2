#include "timberlens/image_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "timberlens/common.hpp"

namespace timberlens {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) {
    throw IoError(std::string("cannot open ") + (mode[0] == 'r' ? "for reading: " : "for writing: ") +
                  path.string());
  }
  return f;
}

// Rows are big-endian 16-bit or 8-bit interleaved, already packed.
void write_png(const std::filesystem::path& path, int width, int height, int bit_depth,
               int color_type, int bytes_per_pixel, const std::vector<std::uint8_t>& rows) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng allocation failed: " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 1);
  png_set_filter(png, 0, PNG_FILTER_SUB);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * bytes_per_pixel;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rows.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("write failed: " + path.string());
}

struct DecodedPng {
  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> rows;
  std::size_t stride = 0;
};

DecodedPng read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng allocation failed: " + path.string());
  }
  DecodedPng out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_set_interlace_handling(png);
  }
  png_read_update_info(png, info);
  out.stride = png_get_rowbytes(png, info);
  out.rows.resize(out.stride * out.height);
  std::vector<png_bytep> ptrs(out.height);
  for (int y = 0; y < out.height; ++y) ptrs[y] = out.rows.data() + y * out.stride;
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace

std::uint16_t depth_to_millimeters(double meters) {
  if (!std::isfinite(meters) || meters <= 0.0) return 0;
  const double mm = std::round(meters * 1000.0);
  if (mm >= kMaxDepthMillimeters) return kMaxDepthMillimeters;
  // A positive depth below half a millimetre still counts as a return.
  return static_cast<std::uint16_t>(std::max(1.0, mm));
}

DepthImage read_depth(const std::filesystem::path& path) {
  DecodedPng png = read_png(path);
  if (png.color_type != PNG_COLOR_TYPE_GRAY || png.bit_depth != 16) {
    throw FormatError("depth PNG must be 16-bit single-channel (got bit depth " +
                      std::to_string(png.bit_depth) + ", color type " +
                      std::to_string(png.color_type) + "): " + path.string());
  }
  DepthImage depth(png.width, png.height);
  for (int y = 0; y < png.height; ++y) {
    const std::uint8_t* row = png.rows.data() + y * png.stride;
    for (int x = 0; x < png.width; ++x) {
      const unsigned mm = (unsigned(row[2 * x]) << 8) | row[2 * x + 1];
      depth.at(x, y) = static_cast<float>(mm / 1000.0);
    }
  }
  return depth;
}

void write_depth(const std::filesystem::path& path, const DepthImage& depth) {
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(depth.width) * depth.height * 2);
  for (std::size_t i = 0; i < depth.meters.size(); ++i) {
    const std::uint16_t mm = depth_to_millimeters(depth.meters[i]);
    rows[2 * i] = static_cast<std::uint8_t>(mm >> 8);
    rows[2 * i + 1] = static_cast<std::uint8_t>(mm & 0xff);
  }
  write_png(path, depth.width, depth.height, 16, PNG_COLOR_TYPE_GRAY, 2, rows);
}

RgbImage read_rgb(const std::filesystem::path& path) {
  DecodedPng png = read_png(path);
  if (png.color_type != PNG_COLOR_TYPE_RGB || png.bit_depth != 8) {
    throw FormatError("RGB PNG must be 8-bit RGB: " + path.string());
  }
  RgbImage img(png.width, png.height);
  for (int y = 0; y < png.height; ++y) {
    std::copy_n(png.rows.data() + y * png.stride, png.width * 3,
                img.pixels.data() + static_cast<std::size_t>(y) * png.width * 3);
  }
  return img;
}

void write_rgb(const std::filesystem::path& path, const RgbImage& image) {
  write_png(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, 3, image.pixels);
}

}  // namespace timberlens
