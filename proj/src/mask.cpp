#include "timberlens/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace timberlens {

std::size_t Mask::area() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

std::size_t Rle::area() const {
  std::size_t total = 0;
  for (std::size_t i = 1; i < counts.size(); i += 2) total += counts[i];
  return total;
}

Rle encode_rle(const Mask& mask) {
  Rle rle{mask.height, mask.width, {}};
  std::uint8_t prev = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width; ++x) {
    for (int y = 0; y < mask.height; ++y) {
      const std::uint8_t v = mask.at(x, y) ? 1 : 0;
      if (v != prev) {
        rle.counts.push_back(run);
        run = 0;
        prev = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

Mask decode_rle(const Rle& rle, int width, int height) {
  const std::uint64_t expected = static_cast<std::uint64_t>(width) * height;
  const std::uint64_t total =
      std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  if (total != expected) {
    throw FormatError("RLE counts sum to " + std::to_string(total) + ", expected " +
                      std::to_string(expected));
  }
  Mask mask(width, height);
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const std::uint32_t run = rle.counts[i];
    if (i % 2 == 1) {
      for (std::uint64_t k = pos; k < pos + run; ++k) {
        const int x = static_cast<int>(k / height);
        const int y = static_cast<int>(k % height);
        mask.at(x, y) = 1;
      }
    }
    pos += run;
  }
  return mask;
}

std::string rle_to_string(const Rle& rle) {
  std::string out;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    std::int64_t x = rle.counts[i];
    if (i > 2) x -= static_cast<std::int64_t>(rle.counts[i - 2]);
    bool more = true;
    while (more) {
      std::int64_t c = x & 0x1f;
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      out.push_back(static_cast<char>(c + 48));
    }
  }
  return out;
}

Rle rle_from_string(std::string_view s, int height, int width) {
  Rle rle{height, width, {}};
  std::size_t p = 0;
  while (p < s.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw FormatError("truncated compressed RLE string");
      const std::int64_t c = static_cast<std::int64_t>(s[p]) - 48;
      if (c < 0 || c > 63) throw FormatError("invalid character in compressed RLE string");
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= static_cast<std::int64_t>(-1) * (std::int64_t{1} << (5 * k));
    }
    const std::size_t m = rle.counts.size();
    if (m > 2) x += static_cast<std::int64_t>(rle.counts[m - 2]);
    if (x < 0) throw FormatError("negative run in compressed RLE string");
    rle.counts.push_back(static_cast<std::uint32_t>(x));
  }
  return rle;
}

Mask rasterize_polygons(std::span<const std::vector<double>> polygons, int width, int height) {
  Mask mask(width, height);
  std::vector<double> crossings;
  for (int y = 0; y < height; ++y) {
    const double py = y + 0.5;
    crossings.clear();
    for (const auto& poly : polygons) {
      const std::size_t n = poly.size() / 2;
      if (n < 3) continue;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = poly[2 * i], yi = poly[2 * i + 1];
        const double xj = poly[2 * j], yj = poly[2 * j + 1];
        // Half-open rule so a vertex exactly on the scanline counts once.
        if ((yi > py) != (yj > py)) {
          crossings.push_back(xi + (py - yi) * (xj - xi) / (yj - yi));
        }
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // Pixel centre x + 0.5 inside [a, b).
      const int x0 = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(crossings[k + 1] - 0.5)) - 1);
      for (int x = x0; x <= x1; ++x) mask.at(x, y) = 1;
    }
  }
  return mask;
}

double iou_mask(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ValidationError("mask dimension mismatch: " + std::to_string(a.width) + "x" +
                          std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                          std::to_string(b.height));
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] != 0, pb = b.data[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::size_t intersection_rle(const Rle& a, const Rle& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ValidationError("RLE dimension mismatch");
  }
  auto advance = [](const Rle& r, std::size_t& i, std::uint64_t& c, bool& v) {
    while (c == 0 && ++i < r.counts.size()) {
      c = r.counts[i];
      v = !v;
    }
  };
  std::size_t ia = 0, ib = 0;
  std::uint64_t ca = a.counts.empty() ? 0 : a.counts[0];
  std::uint64_t cb = b.counts.empty() ? 0 : b.counts[0];
  bool va = false, vb = false;
  if (!a.counts.empty()) advance(a, ia, ca, va);
  if (!b.counts.empty()) advance(b, ib, cb, vb);
  std::size_t inter = 0;
  while (ia < a.counts.size() && ib < b.counts.size()) {
    const std::uint64_t step = std::min(ca, cb);
    if (va && vb) inter += step;
    ca -= step;
    cb -= step;
    advance(a, ia, ca, va);
    advance(b, ib, cb, vb);
  }
  return inter;
}

double iou_rle(const Rle& a, const Rle& b) {
  const std::size_t inter = intersection_rle(a, b);
  const std::size_t uni = a.area() + b.area() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<BBox> mask_bbox(const Mask& mask) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  return BBox{double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)};
}

Mask morph(const Mask& mask, int radius) {
  if (radius == 0) return mask;
  const bool dilate = radius > 0;
  const int r = std::abs(radius);
  // Separable: horizontal pass then vertical pass.
  auto pass = [&](const Mask& src, bool horizontal) {
    Mask out(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
      for (int x = 0; x < src.width; ++x) {
        bool acc = !dilate;
        for (int k = -r; k <= r; ++k) {
          const int xx = horizontal ? x + k : x;
          const int yy = horizontal ? y : y + k;
          const bool inside = xx >= 0 && yy >= 0 && xx < src.width && yy < src.height;
          const bool v = inside && src.at(xx, yy);
          if (dilate ? v : !v) {
            acc = dilate;
            break;
          }
        }
        out.at(x, y) = acc ? 1 : 0;
      }
    }
    return out;
  };
  return pass(pass(mask, true), false);
}

}  // namespace timberlens
