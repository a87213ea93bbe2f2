#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "timberlens/common.hpp"
#include "timberlens/dataset.hpp"
#include "timberlens/image_io.hpp"
#include "timberlens/mask.hpp"

namespace timberlens {

// World frame: x east, y north, z up, meters. Terrain covers
// [0, terrain_size] x [0, terrain_size].

enum class DensityProfile { kPlantation, kManaged, kNatural };
enum class Lighting { kMorning, kDay, kEvening, kNight };
enum class Weather { kClear, kFog, kRain, kSnow };

struct Range {
  double min = 0.0, max = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  double terrain_size = 100.0;    // m per side
  double tree_density = 400.0;    // trees per hectare
  DensityProfile density_profile = DensityProfile::kNatural;
  double understorey_density = 0.3;
  Lighting lighting = Lighting::kDay;
  Weather weather = Weather::kClear;
  Range trunk_radius_range{0.10, 0.35};
  Range tree_height_range{12.0, 25.0};
  double max_slope_spawn = 30.0;  // degrees
  Range altitude_band{0.0, 10.0};

  // Sampling knobs beyond the core description.
  double max_lean_deg = 8.0;
  double roll_pitch_range_deg = 10.0;
  Range standoff_range{2.0, 8.0};
  double camera_height = 1.5;

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// Throws ValidationError naming the first offending field.
void validate(const SceneSpec& spec);

nlohmann::json to_json(const SceneSpec& spec);
/// Missing keys keep their defaults; unknown keys and bad values throw
/// ValidationError.
SceneSpec scene_spec_from_json(const nlohmann::json& j);

const char* to_string(DensityProfile p);
const char* to_string(Lighting l);
const char* to_string(Weather w);

/// Deterministic engine for a (seed, stream) pair.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0);

struct TerrainField {
  int nx = 0, ny = 0;  // grid points
  double cell_size = 1.0;
  std::vector<double> heights;  // row-major, ny rows of nx

  double at(int i, int j) const { return heights[static_cast<std::size_t>(j) * nx + i]; }
  double extent_x() const { return (nx - 1) * cell_size; }
  double extent_y() const { return (ny - 1) * cell_size; }
  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= extent_x() && y <= extent_y();
  }
  /// Bilinear; positions outside the grid are clamped to its border.
  double height(double x, double y) const;
  /// Gradient of the bilinear surface (dh/dx, dh/dy).
  std::array<double, 2> gradient(double x, double y) const;
  double slope_deg(double x, double y) const;
};

/// Fractal value noise stretched to span altitude_band.
TerrainField build_terrain(const SceneSpec& spec);

struct TreeInstance {
  int id = 0;
  Vec3 base_position;  // lowest ground point under the footprint
  double trunk_radius = 0.2;
  double height = 15.0;
  Vec3 lean{0.0, 0.0, 1.0};
  double taper = 0.0;  // radius lost per meter along the axis
  int appearance_id = 0;
  double crown_radius = 2.0;

  Vec3 axis_point(double s) const { return base_position + lean * s; }
  double radius_at(double s) const { return trunk_radius - taper * s; }
  /// Axis parameter at world height z.
  double s_at_height(double z) const { return (z - base_position.z) / lean.z; }
};

inline constexpr int kAppearanceVariants = 17;

std::vector<TreeInstance> spawn_trees(const TerrainField& terrain, const SceneSpec& spec);

/// Ground shrub drawn as a camera-facing quad.
struct Billboard {
  Vec3 base;
  double width = 1.0;
  double height = 0.8;
  std::array<std::uint8_t, 3> color{60, 90, 40};
};

std::vector<Billboard> spawn_understorey(const TerrainField& terrain, const SceneSpec& spec);

/// Arbitrary opaque quad; corners in order around the perimeter.
struct Occluder {
  std::array<Vec3, 4> corners;
  std::array<std::uint8_t, 3> color{128, 128, 128};
};

struct Scene {
  SceneSpec spec;
  TerrainField terrain;
  std::vector<TreeInstance> trees;
  std::vector<Billboard> understorey;
  std::vector<Occluder> occluders;
};

Scene make_scene(const SceneSpec& spec);

struct CameraPose {
  Vec3 position;
  double roll = 0.0, pitch = 0.0, yaw = 0.0;  // radians
  CameraIntrinsics intrinsics;
  int target_tree = -1;

  /// Camera axes in world coordinates: right (x), down (y), forward (z).
  std::array<Vec3, 3> axes() const;
  Vec3 world_to_camera(const Vec3& p) const;
  Vec3 camera_to_world(const Vec3& p) const;
};

/// Aim the camera from `position` at `target`, then roll about the view axis.
CameraPose look_at(const Vec3& position, const Vec3& target, double roll,
                   const CameraIntrinsics& k);

/// Each pose aims at a random tree from a random azimuth, so the optical
/// axis passes through that tree's trunk axis. Throws ValidationError for
/// an empty tree list or n < 1.
std::vector<CameraPose> sample_camera_poses(const std::vector<TreeInstance>& trees,
                                            const TerrainField& terrain, int n,
                                            const SceneSpec& spec,
                                            const CameraIntrinsics& k = {});

struct FrameBand {
  int min_frames = 200;
  int max_frames = 1000;
  double frames_per_tree = 2.0;
};

/// Dataset-mode frame count: proportional to tree count, clamped to the band.
int scene_frame_count(std::size_t tree_count, const FrameBand& band = {});

// Surface ids in the render id buffer. Equal depths resolve to the lower
// id, so trunks beat everything else and lower tree ids beat higher ones.
namespace surface {
inline constexpr std::uint32_t kSky = 0xFFFFFFFFu;
inline constexpr std::uint32_t kCrownTag = 0x20000000u;
inline constexpr std::uint32_t kOccluderTag = 0x40000000u;
inline constexpr std::uint32_t kUnderstoreyTag = 0x60000000u;
inline constexpr std::uint32_t kTerrain = 0x80000000u;

inline std::uint32_t trunk(int tree_id, bool base_band) {
  return (static_cast<std::uint32_t>(tree_id + 1) << 1) | (base_band ? 1u : 0u);
}
inline bool is_trunk(std::uint32_t id) { return id != 0 && id < kCrownTag; }
inline int trunk_tree(std::uint32_t id) { return static_cast<int>(id >> 1) - 1; }
inline bool is_base_band(std::uint32_t id) { return is_trunk(id) && (id & 1u); }
}  // namespace surface

struct RenderedFrame {
  int width = 0, height = 0;
  RgbImage rgb;
  DepthImage depth;  // z-depth in meters, +inf where nothing is hit
  std::vector<std::uint32_t> ids;

  std::uint32_t id_at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
};

struct RenderOptions {
  int width = 1280;
  int height = 720;
  std::uint64_t noise_seed = 0;  // weather particles and sensor noise
  double max_draw_distance = 80.0;
  bool shade = true;  // false skips the colour pass (geometry only)
};

RenderedFrame render(const Scene& scene, const CameraPose& pose, const RenderOptions& options);

/// Trunk and crown of one tree standing alone on the terrain, same camera.
RenderedFrame render_solo(const Scene& scene, int tree_id, const CameraPose& pose,
                          const RenderOptions& options);

struct InstanceAnnotation {
  int tree_id = 0;
  BBox bbox;
  Mask mask;
  KeypointSet keypoints{};
  double occlusion_tree = 0.0;
  std::optional<double> occlusion_base;  // absent when no base pixels are in frame
  double distance_m = 0.0;
};

struct AnnotateOptions {
  double max_distance = 10.0;   // m, camera to trunk base
  double max_occlusion = 0.70;  // visible fraction must reach 30 %
};

std::vector<InstanceAnnotation> annotate(const Scene& scene, const CameraPose& pose,
                                         const RenderedFrame& frame,
                                         const RenderOptions& render_options,
                                         const AnnotateOptions& options = {});

struct GenerateOptions {
  std::optional<int> frames_per_scene;  // overrides the dataset-mode band
  FrameBand band;
  int width = 1280;
  int height = 720;
  unsigned threads = 1;
  AnnotateOptions annotate;
};

struct SceneSummary {
  std::uint64_t seed = 0;
  std::size_t tree_count = 0;
  int frames = 0;
  std::size_t annotations = 0;
};

struct GenerationResult {
  DatasetIndex index;
  std::vector<SceneSummary> scenes;
  nlohmann::json manifest;
};

inline constexpr const char* kAnnotationFile = "annotations.json";
inline constexpr const char* kManifestFile = "manifest.json";

/// Writes rgb/ and depth/ PNGs, annotations.json and manifest.json under
/// out_dir. Output is independent of the thread count.
GenerationResult generate_dataset(const std::vector<SceneSpec>& specs,
                                  const std::filesystem::path& out_dir,
                                  const GenerateOptions& options = {});

/// Re-runs the generation recorded in a manifest into out_dir.
GenerationResult regenerate_from_manifest(const std::filesystem::path& manifest_path,
                                          const std::filesystem::path& out_dir,
                                          unsigned threads = 1);

nlohmann::json to_json(const GenerateOptions& options);
GenerateOptions generate_options_from_json(const nlohmann::json& j);

}  // namespace timberlens
