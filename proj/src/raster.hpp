#pragma once

// Internal rasterizer shared by rendering and annotation.

#include <array>
#include <cstdint>
#include <vector>

#include "timberlens/synth.hpp"

namespace timberlens::detail {

struct Triangle {
  std::array<Vec3, 3> v;  // world frame
  std::uint32_t id = surface::kSky;
  std::array<float, 3> color{0.0f, 0.0f, 0.0f};  // linear 0..255, pre-shaded
};

struct Raster {
  int width = 0, height = 0;
  std::vector<float> depth;
  std::vector<std::uint32_t> ids;
  std::vector<std::array<float, 3>> color;  // empty when colour is off

  Raster(int w, int h, bool with_color);
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

inline constexpr double kNearPlane = 0.05;

void rasterize(const std::vector<Triangle>& tris, const CameraPose& pose, Raster& out);

Raster terrain_layer(const Scene& scene, const CameraPose& pose, const RenderOptions& options);
/// One tree drawn over a copy of the terrain-only layer.
Raster solo_raster(const Scene& scene, int tree_id, const CameraPose& pose, const Raster& ground);

/// Trunk (two bands) and crown of one tree.
void tree_triangles(const Scene& scene, const TreeInstance& tree, std::vector<Triangle>& out,
                    bool shade);
void terrain_triangles(const Scene& scene, const CameraPose& pose, double max_distance,
                       std::vector<Triangle>& out, bool shade);

/// Trees whose bounding volume may reach the view within max_distance.
bool tree_in_view(const TreeInstance& tree, const CameraPose& pose, double max_distance);

/// Axis parameter of the felling cut and of the top of the base band.
double felling_cut_s(const Scene& scene, const TreeInstance& tree);
double base_band_top_s(const Scene& scene, const TreeInstance& tree);
double ground_s(const Scene& scene, const TreeInstance& tree);

inline constexpr double kFellingCutHeight = 0.10;
inline constexpr double kBaseBandHeight = 0.30;
inline constexpr double kInclinationStep = 0.90;

}  // namespace timberlens::detail
