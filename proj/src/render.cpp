#include <algorithm>
#include <cmath>
#include <limits>

#include "raster.hpp"

namespace timberlens {
namespace detail {

namespace {

constexpr int kTrunkSegments = 32;
constexpr int kCrownSegments = 16;

struct Light {
  Vec3 sun;
  double ambient, diffuse, gain;
  std::array<double, 3> tint;
  std::array<double, 3> sky;
};

Light light_for(Lighting l) {
  switch (l) {
    case Lighting::kMorning:
      return {normalized({0.8, 0.2, 0.35}), 0.45, 0.6, 0.9, {1.05, 0.95, 0.85}, {200, 190, 170}};
    case Lighting::kEvening:
      return {normalized({-0.8, -0.1, 0.25}), 0.40, 0.55, 0.75, {1.12, 0.85, 0.68}, {215, 150, 110}};
    case Lighting::kNight:
      return {normalized({0.2, 0.5, 0.8}), 0.55, 0.25, 0.25, {0.72, 0.82, 1.15}, {12, 16, 30}};
    case Lighting::kDay:
    default:
      return {normalized({0.3, 0.4, 0.85}), 0.45, 0.6, 1.0, {1.0, 1.0, 1.0}, {150, 190, 230}};
  }
}

std::array<float, 3> shade(const std::array<double, 3>& base, const Vec3& a, const Vec3& b,
                           const Vec3& c, const Light& light) {
  const Vec3 n = normalized(cross(b - a, c - a));
  const double lambert = std::abs(dot(n, light.sun));
  const double k = (light.ambient + light.diffuse * lambert) * light.gain;
  return {static_cast<float>(base[0] * k * light.tint[0]),
          static_cast<float>(base[1] * k * light.tint[1]),
          static_cast<float>(base[2] * k * light.tint[2])};
}

std::array<double, 3> bark_color(int appearance) {
  const double t = double(appearance % kAppearanceVariants) / (kAppearanceVariants - 1);
  return {70.0 + 50.0 * t, 55.0 + 30.0 * t, 40.0 + 25.0 * (1.0 - t)};
}

std::array<double, 3> foliage_color(int appearance) {
  const double t = double((appearance * 7) % kAppearanceVariants) / (kAppearanceVariants - 1);
  return {30.0 + 30.0 * t, 80.0 + 40.0 * t, 35.0 + 15.0 * t};
}

void push(std::vector<Triangle>& out, const Vec3& a, const Vec3& b, const Vec3& c,
          std::uint32_t id, const std::array<double, 3>& base, const Light* light) {
  Triangle t{{a, b, c}, id, {}};
  if (light) t.color = shade(base, a, b, c, *light);
  out.push_back(t);
}

// Orthonormal pair spanning the plane perpendicular to the unit vector `axis`.
std::array<Vec3, 2> perpendicular_basis(const Vec3& axis) {
  const Vec3 ref = std::abs(axis.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  const Vec3 a = normalized(cross(axis, ref));
  return {a, cross(axis, a)};
}

}  // namespace

Raster::Raster(int w, int h, bool with_color)
    : width(w),
      height(h),
      depth(static_cast<std::size_t>(w) * h, std::numeric_limits<float>::infinity()),
      ids(static_cast<std::size_t>(w) * h, surface::kSky) {
  if (with_color) color.assign(static_cast<std::size_t>(w) * h, {0.0f, 0.0f, 0.0f});
}

double ground_s(const Scene& scene, const TreeInstance& t) {
  return t.s_at_height(scene.terrain.height(t.base_position.x, t.base_position.y));
}

double felling_cut_s(const Scene& scene, const TreeInstance& t) {
  return t.s_at_height(scene.terrain.height(t.base_position.x, t.base_position.y) +
                       kFellingCutHeight);
}

double base_band_top_s(const Scene& scene, const TreeInstance& t) {
  return std::clamp(t.s_at_height(scene.terrain.height(t.base_position.x, t.base_position.y) +
                                  kBaseBandHeight),
                    0.0, t.height);
}

void tree_triangles(const Scene& scene, const TreeInstance& tree, std::vector<Triangle>& out,
                    bool with_shade) {
  const Light light = light_for(scene.spec.lighting);
  const Light* lp = with_shade ? &light : nullptr;
  const auto [ea, eb] = perpendicular_basis(tree.lean);
  // Mid-scaled polygon: the facets straddle the true circle.
  const double scale = 2.0 / (1.0 + std::cos(kPi / kTrunkSegments));

  auto ring = [&](double s, double radius, int segments) {
    std::vector<Vec3> pts(static_cast<std::size_t>(segments));
    const Vec3 c = tree.axis_point(s);
    for (int k = 0; k < segments; ++k) {
      const double a = 2.0 * kPi * k / segments;
      pts[k] = c + (ea * std::cos(a) + eb * std::sin(a)) * radius;
    }
    return pts;
  };

  const auto bark = bark_color(tree.appearance_id);
  const double s_band = base_band_top_s(scene, tree);
  const double cuts[3] = {0.0, s_band, tree.height};
  for (int band = 0; band < 2; ++band) {
    const double s0 = cuts[band], s1 = cuts[band + 1];
    if (s1 <= s0) continue;
    const std::uint32_t id = surface::trunk(tree.id, band == 0);
    const auto lo = ring(s0, tree.radius_at(s0) * scale, kTrunkSegments);
    const auto hi = ring(s1, tree.radius_at(s1) * scale, kTrunkSegments);
    for (int k = 0; k < kTrunkSegments; ++k) {
      const int n = (k + 1) % kTrunkSegments;
      push(out, lo[k], lo[n], hi[n], id, bark, lp);
      push(out, lo[k], hi[n], hi[k], id, bark, lp);
    }
  }
  const auto top = ring(tree.height, tree.radius_at(tree.height) * scale, kTrunkSegments);
  const Vec3 top_c = tree.axis_point(tree.height);
  for (int k = 0; k < kTrunkSegments; ++k) {
    push(out, top_c, top[k], top[(k + 1) % kTrunkSegments], surface::trunk(tree.id, false), bark,
         lp);
  }

  const std::uint32_t crown_id = surface::kCrownTag | static_cast<std::uint32_t>(tree.id);
  const auto leaf = foliage_color(tree.appearance_id);
  const double s_crown = 0.5 * tree.height;
  const auto base = ring(s_crown, tree.crown_radius, kCrownSegments);
  const Vec3 base_c = tree.axis_point(s_crown);
  const Vec3 apex = tree.axis_point(tree.height + 0.5);
  for (int k = 0; k < kCrownSegments; ++k) {
    const int n = (k + 1) % kCrownSegments;
    push(out, base[k], base[n], apex, crown_id, leaf, lp);
    push(out, base_c, base[n], base[k], crown_id, leaf, lp);
  }
}

void terrain_triangles(const Scene& scene, const CameraPose& pose, double max_distance,
                       std::vector<Triangle>& out, bool with_shade) {
  const TerrainField& t = scene.terrain;
  const Light light = light_for(scene.spec.lighting);
  const Light* lp = with_shade ? &light : nullptr;
  const bool snow = scene.spec.weather == Weather::kSnow;
  const auto f = pose.axes()[2];
  const double cs = t.cell_size;
  const int i0 = std::max(0, static_cast<int>(std::floor((pose.position.x - max_distance) / cs)));
  const int i1 = std::min(t.nx - 2, static_cast<int>(std::ceil((pose.position.x + max_distance) / cs)));
  const int j0 = std::max(0, static_cast<int>(std::floor((pose.position.y - max_distance) / cs)));
  const int j1 = std::min(t.ny - 2, static_cast<int>(std::ceil((pose.position.y + max_distance) / cs)));
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const Vec3 p00{i * cs, j * cs, t.at(i, j)};
      const Vec3 p10{(i + 1) * cs, j * cs, t.at(i + 1, j)};
      const Vec3 p01{i * cs, (j + 1) * cs, t.at(i, j + 1)};
      const Vec3 p11{(i + 1) * cs, (j + 1) * cs, t.at(i + 1, j + 1)};
      const Vec3 mid = (p00 + p11) * 0.5;
      const Vec3 rel = mid - pose.position;
      if (std::hypot(rel.x, rel.y) > max_distance) continue;
      if (dot(rel, f) < -2.0 * cs) continue;
      const unsigned h = static_cast<unsigned>(i * 73856093) ^ static_cast<unsigned>(j * 19349663);
      const double v = (h % 97) / 96.0;
      const std::array<double, 3> ground =
          snow ? std::array<double, 3>{215 + 20 * v, 220 + 20 * v, 228 + 20 * v}
               : std::array<double, 3>{85 + 25 * v, 80 + 30 * v, 50 + 15 * v};
      push(out, p00, p10, p11, surface::kTerrain, ground, lp);
      push(out, p00, p11, p01, surface::kTerrain, ground, lp);
    }
  }
}

bool tree_in_view(const TreeInstance& tree, const CameraPose& pose, double max_distance) {
  const Vec3 rel = tree.base_position - pose.position;
  if (std::hypot(rel.x, rel.y) - tree.crown_radius > max_distance) return false;
  const Vec3 centre = tree.axis_point(0.5 * tree.height);
  const double radius = 0.5 * tree.height + tree.crown_radius + 1.0;
  return dot(centre - pose.position, pose.axes()[2]) > -radius;
}

namespace {

struct ScreenVertex {
  double x, y, iz;
};

void draw(const ScreenVertex& a, const ScreenVertex& b, const ScreenVertex& c,
          const Triangle& tri, Raster& r) {
  double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  if (!(std::abs(area) > 0.0) || !std::isfinite(area)) return;
  const double min_x = std::min({a.x, b.x, c.x}), max_x = std::max({a.x, b.x, c.x});
  const double min_y = std::min({a.y, b.y, c.y}), max_y = std::max({a.y, b.y, c.y});
  const int x0 = std::max(0, static_cast<int>(std::ceil(std::max(min_x, -1.0))));
  const int x1 = std::min(r.width - 1, static_cast<int>(std::floor(std::min(max_x, 1e9))));
  const int y0 = std::max(0, static_cast<int>(std::ceil(std::max(min_y, -1.0))));
  const int y1 = std::min(r.height - 1, static_cast<int>(std::floor(std::min(max_y, 1e9))));
  if (x0 > x1 || y0 > y1) return;

  // e(p) = A * px + B * py + C, positive inside after orienting by `sign`.
  const double sign = area > 0.0 ? 1.0 : -1.0;
  area *= sign;
  auto edge = [&](const ScreenVertex& p, const ScreenVertex& q) {
    return std::array<double, 3>{-(q.y - p.y) * sign, (q.x - p.x) * sign,
                                 ((q.y - p.y) * p.x - (q.x - p.x) * p.y) * sign};
  };
  const auto e0 = edge(b, c), e1 = edge(c, a), e2 = edge(a, b);
  const double inv_area = 1.0 / area;
  const bool with_color = !r.color.empty();

  for (int y = y0; y <= y1; ++y) {
    double w0 = e0[0] * x0 + e0[1] * y + e0[2];
    double w1 = e1[0] * x0 + e1[1] * y + e1[2];
    double w2 = e2[0] * x0 + e2[1] * y + e2[2];
    for (int x = x0; x <= x1; ++x, w0 += e0[0], w1 += e1[0], w2 += e2[0]) {
      if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
      const double iz = (w0 * a.iz + w1 * b.iz + w2 * c.iz) * inv_area;
      if (!(iz > 0.0)) continue;
      const float z = static_cast<float>(1.0 / iz);
      const std::size_t i = r.index(x, y);
      if (z < r.depth[i] || (z == r.depth[i] && tri.id < r.ids[i])) {
        r.depth[i] = z;
        r.ids[i] = tri.id;
        if (with_color) r.color[i] = tri.color;
      }
    }
  }
}

}  // namespace

void rasterize(const std::vector<Triangle>& tris, const CameraPose& pose, Raster& out) {
  const auto [ax, ay, az] = pose.axes();
  const CameraIntrinsics& k = pose.intrinsics;
  auto to_cam = [&](const Vec3& p) {
    const Vec3 q = p - pose.position;
    return Vec3{dot(q, ax), dot(q, ay), dot(q, az)};
  };
  auto project = [&](const Vec3& c) {
    return ScreenVertex{k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy, 1.0 / c.z};
  };

  for (const auto& tri : tris) {
    const Vec3 c[3] = {to_cam(tri.v[0]), to_cam(tri.v[1]), to_cam(tri.v[2])};
    const int in = (c[0].z >= kNearPlane) + (c[1].z >= kNearPlane) + (c[2].z >= kNearPlane);
    if (in == 0) continue;
    if (in == 3) {
      draw(project(c[0]), project(c[1]), project(c[2]), tri, out);
      continue;
    }
    // Clip against the near plane.
    Vec3 poly[4];
    int n = 0;
    for (int i = 0; i < 3; ++i) {
      const Vec3& p = c[i];
      const Vec3& q = c[(i + 1) % 3];
      const bool pin = p.z >= kNearPlane, qin = q.z >= kNearPlane;
      if (pin) poly[n++] = p;
      if (pin != qin) {
        const double t = (kNearPlane - p.z) / (q.z - p.z);
        poly[n++] = p + (q - p) * t;
      }
    }
    for (int i = 1; i + 1 < n; ++i) {
      draw(project(poly[0]), project(poly[i]), project(poly[i + 1]), tri, out);
    }
  }
}

}  // namespace detail

namespace {

using detail::Raster;
using detail::Triangle;

void understorey_triangles(const Scene& scene, const CameraPose& pose,
                           std::vector<Triangle>& out, bool with_shade) {
  constexpr double kShrubRange = 30.0;
  const auto f = pose.axes()[2];
  const double gain = with_shade ? 1.0 : 0.0;
  double light = 1.0;
  switch (scene.spec.lighting) {
    case Lighting::kMorning: light = 0.8; break;
    case Lighting::kEvening: light = 0.65; break;
    case Lighting::kNight: light = 0.22; break;
    case Lighting::kDay: break;
  }
  for (std::size_t i = 0; i < scene.understorey.size(); ++i) {
    const Billboard& b = scene.understorey[i];
    Vec3 to_cam = pose.position - b.base;
    to_cam.z = 0.0;
    const double d = norm(to_cam);
    if (d > kShrubRange || d < 1e-6) continue;
    if (dot(b.base - pose.position, f) < -b.width) continue;
    const Vec3 right = normalized(cross(Vec3{0, 0, 1}, to_cam)) * (0.5 * b.width);
    const Vec3 up{0, 0, b.height};
    const Vec3 p0 = b.base - right, p1 = b.base + right;
    const std::uint32_t id = surface::kUnderstoreyTag | static_cast<std::uint32_t>(i & 0x1FFFFFFF);
    const std::array<float, 3> c{float(b.color[0] * light * gain), float(b.color[1] * light * gain),
                                 float(b.color[2] * light * gain)};
    out.push_back({{p0, p1, p1 + up}, id, c});
    out.push_back({{p0, p1 + up, p0 + up}, id, c});
  }
}

void occluder_triangles(const Scene& scene, std::vector<Triangle>& out) {
  for (std::size_t i = 0; i < scene.occluders.size(); ++i) {
    const Occluder& o = scene.occluders[i];
    const std::uint32_t id = surface::kOccluderTag | static_cast<std::uint32_t>(i & 0x1FFFFFFF);
    const std::array<float, 3> c{float(o.color[0]), float(o.color[1]), float(o.color[2])};
    out.push_back({{o.corners[0], o.corners[1], o.corners[2]}, id, c});
    out.push_back({{o.corners[0], o.corners[2], o.corners[3]}, id, c});
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void finish_color(const Scene& scene, const Raster& r, const RenderOptions& options,
                  RgbImage& rgb) {
  std::array<double, 3> sky{150, 190, 230};
  switch (scene.spec.lighting) {
    case Lighting::kMorning: sky = {200, 190, 170}; break;
    case Lighting::kEvening: sky = {215, 150, 110}; break;
    case Lighting::kNight: sky = {12, 16, 30}; break;
    case Lighting::kDay: break;
  }
  double fog_rate = 1.0 / 400.0;
  std::array<double, 3> fog = sky;
  switch (scene.spec.weather) {
    case Weather::kFog:
      fog_rate = 1.0 / 25.0;
      fog = {sky[0] * 0.5 + 100, sky[1] * 0.5 + 100, sky[2] * 0.5 + 100};
      break;
    case Weather::kRain: fog_rate = 1.0 / 80.0; break;
    case Weather::kSnow: fog_rate = 1.0 / 60.0; break;
    case Weather::kClear: break;
  }

  std::vector<float> px(static_cast<std::size_t>(r.width) * r.height * 3);
  for (std::size_t i = 0; i < r.depth.size(); ++i) {
    const double z = r.depth[i];
    for (int ch = 0; ch < 3; ++ch) {
      double v;
      if (!std::isfinite(z)) {
        v = scene.spec.weather == Weather::kFog ? fog[ch] : sky[ch];
      } else {
        const double f = 1.0 - std::exp(-z * fog_rate);
        v = r.color[i][ch] * (1.0 - f) + fog[ch] * f;
      }
      px[i * 3 + ch] = static_cast<float>(v);
    }
  }

  auto rng = make_rng(options.noise_seed, 0x5eed);
  const std::size_t area = static_cast<std::size_t>(r.width) * r.height;
  if (scene.spec.weather == Weather::kRain) {
    std::uniform_int_distribution<int> ux(0, r.width - 1), uy(0, r.height - 1), len(8, 20);
    for (std::size_t s = 0; s < area / 400; ++s) {
      int x = ux(rng), y = uy(rng);
      const int l = len(rng);
      for (int t = 0; t < l && x < r.width && y < r.height; ++t, ++y) {
        if (t % 3 == 2) ++x;
        for (int ch = 0; ch < 3; ++ch) px[r.index(x, y) * 3 + ch] += 35.0f;
      }
    }
  } else if (scene.spec.weather == Weather::kSnow) {
    std::uniform_int_distribution<int> ux(0, r.width - 1), uy(0, r.height - 1), size(1, 2);
    for (std::size_t s = 0; s < area / 150; ++s) {
      const int x0 = ux(rng), y0 = uy(rng), sz = size(rng);
      for (int y = y0; y < std::min(r.height, y0 + sz); ++y) {
        for (int x = x0; x < std::min(r.width, x0 + sz); ++x) {
          for (int ch = 0; ch < 3; ++ch) px[r.index(x, y) * 3 + ch] = 245.0f;
        }
      }
    }
  }
  std::normal_distribution<float> noise(0.0f, 2.0f);
  rgb = RgbImage(r.width, r.height);
  for (std::size_t i = 0; i < px.size(); ++i) rgb.pixels[i] = to_byte(px[i] + noise(rng));
}

RenderedFrame to_frame(Raster&& r) {
  RenderedFrame f;
  f.width = r.width;
  f.height = r.height;
  f.depth.width = r.width;
  f.depth.height = r.height;
  f.depth.meters = std::move(r.depth);
  f.ids = std::move(r.ids);
  return f;
}

}  // namespace

RenderedFrame render(const Scene& scene, const CameraPose& pose, const RenderOptions& options) {
  if (options.width < 1 || options.height < 1) throw ValidationError("render: empty resolution");
  std::vector<Triangle> tris;
  for (const auto& tree : scene.trees) {
    if (detail::tree_in_view(tree, pose, options.max_draw_distance)) {
      detail::tree_triangles(scene, tree, tris, options.shade);
    }
  }
  occluder_triangles(scene, tris);
  understorey_triangles(scene, pose, tris, options.shade);
  detail::terrain_triangles(scene, pose, options.max_draw_distance, tris, options.shade);

  Raster r(options.width, options.height, options.shade);
  detail::rasterize(tris, pose, r);
  RgbImage rgb;
  if (options.shade) finish_color(scene, r, options, rgb);
  RenderedFrame f = to_frame(std::move(r));
  f.rgb = options.shade ? std::move(rgb) : RgbImage(options.width, options.height);
  return f;
}

namespace detail {

Raster terrain_layer(const Scene& scene, const CameraPose& pose, const RenderOptions& options) {
  std::vector<Triangle> tris;
  terrain_triangles(scene, pose, options.max_draw_distance, tris, false);
  Raster r(options.width, options.height, false);
  rasterize(tris, pose, r);
  return r;
}

Raster solo_raster(const Scene& scene, int tree_id, const CameraPose& pose, const Raster& ground) {
  Raster r = ground;
  std::vector<Triangle> tris;
  tree_triangles(scene, scene.trees[tree_id], tris, false);
  rasterize(tris, pose, r);
  return r;
}

}  // namespace detail

RenderedFrame render_solo(const Scene& scene, int tree_id, const CameraPose& pose,
                          const RenderOptions& options) {
  if (tree_id < 0 || tree_id >= static_cast<int>(scene.trees.size())) {
    throw ValidationError("render_solo: no tree with id " + std::to_string(tree_id));
  }
  RenderedFrame f =
      to_frame(detail::solo_raster(scene, tree_id, pose, detail::terrain_layer(scene, pose, options)));
  f.rgb = RgbImage(options.width, options.height);
  return f;
}

}  // namespace timberlens
