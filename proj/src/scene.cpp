#include <algorithm>
#include <cmath>
#include <limits>

#include "timberlens/synth.hpp"

namespace timberlens {

using nlohmann::json;

namespace {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<DensityProfile> kProfiles[] = {{DensityProfile::kPlantation, "plantation"},
                                                  {DensityProfile::kManaged, "managed"},
                                                  {DensityProfile::kNatural, "natural"}};
constexpr EnumName<Lighting> kLightings[] = {{Lighting::kMorning, "morning"},
                                             {Lighting::kDay, "day"},
                                             {Lighting::kEvening, "evening"},
                                             {Lighting::kNight, "night"}};
constexpr EnumName<Weather> kWeathers[] = {{Weather::kClear, "clear"},
                                           {Weather::kFog, "fog"},
                                           {Weather::kRain, "rain"},
                                           {Weather::kSnow, "snow"}};

template <class E, std::size_t N>
const char* name_of(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <class E, std::size_t N>
E parse_enum(const EnumName<E> (&table)[N], const json& j, const char* key) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    for (const auto& e : table) {
      if (s == e.name) return e.value;
    }
  }
  std::string allowed;
  for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
  throw ValidationError(std::string(key) + ": expected one of {" + allowed + "}, got " + j.dump());
}

void check_range(const Range& r, const char* name, double lower_exclusive = -1e300) {
  if (!std::isfinite(r.min) || !std::isfinite(r.max)) {
    throw ValidationError(std::string(name) + ": non-finite bound");
  }
  if (r.min > r.max) throw ValidationError(std::string(name) + ": min exceeds max");
  if (!(r.min > lower_exclusive)) {
    throw ValidationError(std::string(name) + ": values must be > " + std::to_string(lower_exclusive));
  }
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, const Range& r) {
  return r.min == r.max ? r.min : uniform(rng, r.min, r.max);
}

}  // namespace

const char* to_string(DensityProfile p) { return name_of(kProfiles, p); }
const char* to_string(Lighting l) { return name_of(kLightings, l); }
const char* to_string(Weather w) { return name_of(kWeathers, w); }

void validate(const SceneSpec& s) {
  check(std::isfinite(s.terrain_size) && s.terrain_size >= 1.0, "terrain_size: must be >= 1 m");
  check(s.terrain_size <= 5000.0, "terrain_size: must be <= 5000 m");
  check(std::isfinite(s.tree_density) && s.tree_density >= 0.0, "tree_density: must be >= 0");
  check(s.tree_density <= 20000.0, "tree_density: must be <= 20000 per hectare");
  check(s.understorey_density >= 0.0 && s.understorey_density <= 1.0,
        "understorey_density: must lie in [0, 1]");
  check_range(s.trunk_radius_range, "trunk_radius_range", 0.0);
  check_range(s.tree_height_range, "tree_height_range", 0.0);
  check_range(s.altitude_band, "altitude_band");
  check_range(s.standoff_range, "standoff_range", 0.0);
  check(s.max_slope_spawn >= 0.0 && s.max_slope_spawn <= 90.0,
        "max_slope_spawn: must lie in [0, 90] degrees");
  check(s.max_lean_deg >= 0.0 && s.max_lean_deg <= 25.0, "max_lean_deg: must lie in [0, 25]");
  check(s.roll_pitch_range_deg >= 0.0 && s.roll_pitch_range_deg <= 45.0,
        "roll_pitch_range_deg: must lie in [0, 45]");
  check(std::isfinite(s.camera_height) && s.camera_height > 0.0, "camera_height: must be > 0");
}

json to_json(const SceneSpec& s) {
  auto range = [](const Range& r) { return json::array({r.min, r.max}); };
  return {{"seed", s.seed},
          {"terrain_size", s.terrain_size},
          {"tree_density", s.tree_density},
          {"density_profile", to_string(s.density_profile)},
          {"understorey_density", s.understorey_density},
          {"lighting", to_string(s.lighting)},
          {"weather", to_string(s.weather)},
          {"trunk_radius_range", range(s.trunk_radius_range)},
          {"tree_height_range", range(s.tree_height_range)},
          {"max_slope_spawn", s.max_slope_spawn},
          {"altitude_band", range(s.altitude_band)},
          {"max_lean_deg", s.max_lean_deg},
          {"roll_pitch_range_deg", s.roll_pitch_range_deg},
          {"standoff_range", range(s.standoff_range)},
          {"camera_height", s.camera_height}};
}

SceneSpec scene_spec_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scene spec: expected an object");
  SceneSpec s;
  auto number = [](const json& v, const std::string& key) {
    if (!v.is_number()) throw ValidationError(key + ": expected a number, got " + v.dump());
    return v.get<double>();
  };
  auto range = [&](const json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 2) {
      throw ValidationError(key + ": expected [min, max], got " + v.dump());
    }
    return Range{number(v[0], key), number(v[1], key)};
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "seed") {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ValidationError("seed: expected a non-negative integer, got " + v.dump());
      }
      s.seed = v.get<std::uint64_t>();
    } else if (key == "terrain_size") {
      s.terrain_size = number(v, key);
    } else if (key == "tree_density") {
      s.tree_density = number(v, key);
    } else if (key == "density_profile") {
      s.density_profile = parse_enum(kProfiles, v, "density_profile");
    } else if (key == "understorey_density") {
      s.understorey_density = number(v, key);
    } else if (key == "lighting") {
      s.lighting = parse_enum(kLightings, v, "lighting");
    } else if (key == "weather") {
      s.weather = parse_enum(kWeathers, v, "weather");
    } else if (key == "trunk_radius_range") {
      s.trunk_radius_range = range(v, key);
    } else if (key == "tree_height_range") {
      s.tree_height_range = range(v, key);
    } else if (key == "max_slope_spawn") {
      s.max_slope_spawn = number(v, key);
    } else if (key == "altitude_band") {
      s.altitude_band = range(v, key);
    } else if (key == "max_lean_deg") {
      s.max_lean_deg = number(v, key);
    } else if (key == "roll_pitch_range_deg") {
      s.roll_pitch_range_deg = number(v, key);
    } else if (key == "standoff_range") {
      s.standoff_range = range(v, key);
    } else if (key == "camera_height") {
      s.camera_height = number(v, key);
    } else {
      throw ValidationError("scene spec: unknown key \"" + key + "\"");
    }
  }
  validate(s);
  return s;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Random streams per scene seed.
namespace stream {
constexpr std::uint64_t kTerrain = 1, kTrees = 2, kUnderstorey = 3, kPoses = 4;
}

double TerrainField::height(double x, double y) const {
  const double fx = std::clamp(x / cell_size, 0.0, double(nx - 1));
  const double fy = std::clamp(y / cell_size, 0.0, double(ny - 1));
  const int i = std::min(static_cast<int>(fx), nx - 2);
  const int j = std::min(static_cast<int>(fy), ny - 2);
  const double tx = fx - i, ty = fy - j;
  const double h00 = at(i, j), h10 = at(i + 1, j), h01 = at(i, j + 1), h11 = at(i + 1, j + 1);
  return (h00 * (1 - tx) + h10 * tx) * (1 - ty) + (h01 * (1 - tx) + h11 * tx) * ty;
}

std::array<double, 2> TerrainField::gradient(double x, double y) const {
  const double fx = std::clamp(x / cell_size, 0.0, double(nx - 1));
  const double fy = std::clamp(y / cell_size, 0.0, double(ny - 1));
  const int i = std::min(static_cast<int>(fx), nx - 2);
  const int j = std::min(static_cast<int>(fy), ny - 2);
  const double tx = fx - i, ty = fy - j;
  const double h00 = at(i, j), h10 = at(i + 1, j), h01 = at(i, j + 1), h11 = at(i + 1, j + 1);
  const double dx = ((h10 - h00) * (1 - ty) + (h11 - h01) * ty) / cell_size;
  const double dy = ((h01 - h00) * (1 - tx) + (h11 - h10) * tx) / cell_size;
  return {dx, dy};
}

double TerrainField::slope_deg(double x, double y) const {
  const auto g = gradient(x, y);
  return rad2deg(std::atan(std::hypot(g[0], g[1])));
}

TerrainField build_terrain(const SceneSpec& spec) {
  validate(spec);
  TerrainField t;
  t.cell_size = 1.0;
  t.nx = t.ny = static_cast<int>(std::ceil(spec.terrain_size / t.cell_size)) + 1;
  t.heights.assign(static_cast<std::size_t>(t.nx) * t.ny, 0.0);

  auto rng = make_rng(spec.seed, stream::kTerrain);
  constexpr int kOctaves = 4;
  double wavelength = 40.0, amplitude = 1.0;
  for (int o = 0; o < kOctaves; ++o, wavelength *= 0.5, amplitude *= 0.5) {
    const int lx = static_cast<int>(std::ceil(spec.terrain_size / wavelength)) + 2;
    std::vector<double> lattice(static_cast<std::size_t>(lx) * lx);
    for (auto& v : lattice) v = uniform(rng, -1.0, 1.0);
    auto lat = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * lx + i]; };
    auto smooth = [](double u) { return u * u * (3.0 - 2.0 * u); };
    for (int j = 0; j < t.ny; ++j) {
      for (int i = 0; i < t.nx; ++i) {
        const double gx = i * t.cell_size / wavelength, gy = j * t.cell_size / wavelength;
        const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
        const double sx = smooth(gx - ix), sy = smooth(gy - iy);
        const double a = lat(ix, iy) * (1 - sx) + lat(ix + 1, iy) * sx;
        const double b = lat(ix, iy + 1) * (1 - sx) + lat(ix + 1, iy + 1) * sx;
        t.heights[static_cast<std::size_t>(j) * t.nx + i] += amplitude * (a * (1 - sy) + b * sy);
      }
    }
  }

  const auto [lo_it, hi_it] = std::minmax_element(t.heights.begin(), t.heights.end());
  const double lo = *lo_it, hi = *hi_it;
  const double band = spec.altitude_band.max - spec.altitude_band.min;
  for (auto& h : t.heights) {
    const double unit = hi > lo ? (h - lo) / (hi - lo) : 0.0;
    h = band == 0.0 ? spec.altitude_band.min
                    : std::clamp(spec.altitude_band.min + unit * band, spec.altitude_band.min,
                                 spec.altitude_band.max);
  }
  return t;
}

namespace {

struct Candidate {
  double x, y;
  int cluster = -1;
};

double wrap(double v, double size) {
  v = std::fmod(v, size);
  return v < 0.0 ? v + size : v;
}

}  // namespace

std::vector<TreeInstance> spawn_trees(const TerrainField& terrain, const SceneSpec& spec) {
  validate(spec);
  std::vector<TreeInstance> trees;
  if (spec.tree_density == 0.0) return trees;

  auto rng = make_rng(spec.seed, stream::kTrees);
  const double size_x = terrain.extent_x(), size_y = terrain.extent_y();
  const double lambda = spec.tree_density * size_x * size_y / 1e4;

  std::vector<Candidate> cands;
  std::vector<std::array<double, 2>> parents;
  constexpr double kClusterSigma = 4.0;
  constexpr double kManagedKeep = 0.7;
  switch (spec.density_profile) {
    case DensityProfile::kPlantation: {
      const double spacing = 100.0 / std::sqrt(spec.tree_density);
      for (double y = spacing / 2; y < size_y; y += spacing) {
        for (double x = spacing / 2; x < size_x; x += spacing) {
          const double jx = uniform(rng, -0.2, 0.2) * spacing;
          const double jy = uniform(rng, -0.2, 0.2) * spacing;
          cands.push_back({std::clamp(x + jx, 0.0, size_x), std::clamp(y + jy, 0.0, size_y)});
        }
      }
      break;
    }
    case DensityProfile::kManaged: {
      const long n = std::poisson_distribution<long>(lambda / kManagedKeep)(rng);
      for (long i = 0; i < n; ++i) {
        const double x = uniform(rng, 0.0, size_x), y = uniform(rng, 0.0, size_y);
        if (uniform(rng, 0.0, 1.0) < kManagedKeep) cands.push_back({x, y});
      }
      break;
    }
    case DensityProfile::kNatural: {
      const long n = std::poisson_distribution<long>(lambda)(rng);
      const long k = std::max(1L, std::lround(lambda / 8.0));
      for (long i = 0; i < k; ++i) parents.push_back({uniform(rng, 0.0, size_x), uniform(rng, 0.0, size_y)});
      std::uniform_int_distribution<long> pick(0, k - 1);
      for (long i = 0; i < n; ++i) cands.push_back({0.0, 0.0, static_cast<int>(pick(rng))});
      break;
    }
  }

  std::normal_distribution<double> offset(0.0, kClusterSigma);
  auto place = [&](Candidate& c, bool redraw) {
    if (c.cluster >= 0) {
      const auto& p = parents[c.cluster];
      c.x = wrap(p[0] + offset(rng), size_x);
      c.y = wrap(p[1] + offset(rng), size_y);
    } else if (redraw) {
      c.x = uniform(rng, 0.0, size_x);
      c.y = uniform(rng, 0.0, size_y);
    }
  };

  const double max_lean = deg2rad(spec.max_lean_deg);
  std::normal_distribution<double> lean_draw(0.0, max_lean / 2.0);
  std::uniform_int_distribution<int> appearance(0, kAppearanceVariants - 1);
  constexpr int kPlacementTries = 20;
  constexpr double kGap = 0.1;

  for (auto& c : cands) {
    TreeInstance t;
    t.trunk_radius = uniform(rng, spec.trunk_radius_range);
    t.height = uniform(rng, spec.tree_height_range);
    const double theta = std::min(std::abs(lean_draw(rng)), max_lean);
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    t.lean = {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
    t.taper = uniform(rng, 0.3, 0.7) * t.trunk_radius / t.height;
    t.appearance_id = appearance(rng);
    t.crown_radius = uniform(rng, 0.12, 0.2) * t.height;

    // Plantation rows keep their slot; stochastic profiles redraw on overlap.
    const bool movable = spec.density_profile != DensityProfile::kPlantation;
    bool placed = false;
    for (int attempt = 0; attempt < (movable ? kPlacementTries : 1); ++attempt) {
      place(c, attempt > 0);
      const bool clear = std::none_of(trees.begin(), trees.end(), [&](const TreeInstance& o) {
        return std::hypot(o.base_position.x - c.x, o.base_position.y - c.y) <
               o.trunk_radius + t.trunk_radius + kGap;
      });
      if (clear) {
        placed = true;
        break;
      }
    }
    if (!placed) continue;
    if (terrain.slope_deg(c.x, c.y) > spec.max_slope_spawn) continue;
    const double ground = terrain.height(c.x, c.y);
    if (ground < spec.altitude_band.min || ground > spec.altitude_band.max) continue;

    double base_z = ground;
    for (int k = 0; k < 8; ++k) {
      const double a = k * kPi / 4.0;
      base_z = std::min(base_z, terrain.height(c.x + t.trunk_radius * std::cos(a),
                                               c.y + t.trunk_radius * std::sin(a)));
    }
    t.base_position = {c.x, c.y, base_z};
    t.id = static_cast<int>(trees.size());
    trees.push_back(t);
  }
  return trees;
}

std::vector<Billboard> spawn_understorey(const TerrainField& terrain, const SceneSpec& spec) {
  std::vector<Billboard> out;
  if (spec.understorey_density <= 0.0) return out;
  auto rng = make_rng(spec.seed, stream::kUnderstorey);
  constexpr double kShrubsPerSquareMeter = 0.15;
  const double lambda =
      spec.understorey_density * kShrubsPerSquareMeter * terrain.extent_x() * terrain.extent_y();
  const long n = std::poisson_distribution<long>(lambda)(rng);
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    Billboard b;
    const double x = uniform(rng, 0.0, terrain.extent_x());
    const double y = uniform(rng, 0.0, terrain.extent_y());
    b.base = {x, y, terrain.height(x, y)};
    b.width = uniform(rng, 0.6, 1.6);
    b.height = uniform(rng, 0.3, 1.1);
    const double g = uniform(rng, 0.0, 1.0);
    b.color = {static_cast<std::uint8_t>(40 + 40 * g), static_cast<std::uint8_t>(80 + 50 * g),
               static_cast<std::uint8_t>(30 + 20 * g)};
    out.push_back(b);
  }
  return out;
}

Scene make_scene(const SceneSpec& spec) {
  Scene s;
  s.spec = spec;
  s.terrain = build_terrain(spec);
  s.trees = spawn_trees(s.terrain, spec);
  s.understorey = spawn_understorey(s.terrain, spec);
  return s;
}

std::array<Vec3, 3> CameraPose::axes() const {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const Vec3 f{cy * cp, sy * cp, sp};
  const Vec3 r0{sy, -cy, 0.0};
  const Vec3 d0 = cross(f, r0);
  const double cr = std::cos(roll), sr = std::sin(roll);
  return {r0 * cr + d0 * sr, d0 * cr - r0 * sr, f};
}

Vec3 CameraPose::world_to_camera(const Vec3& p) const {
  const auto [r, d, f] = axes();
  const Vec3 q = p - position;
  return {dot(q, r), dot(q, d), dot(q, f)};
}

Vec3 CameraPose::camera_to_world(const Vec3& p) const {
  const auto [r, d, f] = axes();
  return position + r * p.x + d * p.y + f * p.z;
}

CameraPose look_at(const Vec3& position, const Vec3& target, double roll,
                   const CameraIntrinsics& k) {
  const Vec3 d = target - position;
  CameraPose p;
  p.position = position;
  p.yaw = std::atan2(d.y, d.x);
  p.pitch = std::atan2(d.z, std::hypot(d.x, d.y));
  p.roll = roll;
  p.intrinsics = k;
  return p;
}

std::vector<CameraPose> sample_camera_poses(const std::vector<TreeInstance>& trees,
                                            const TerrainField& terrain, int n,
                                            const SceneSpec& spec, const CameraIntrinsics& k) {
  if (trees.empty()) throw ValidationError("sample_camera_poses: scene has no trees");
  if (n < 1) throw ValidationError("sample_camera_poses: n must be >= 1");
  auto rng = make_rng(spec.seed, stream::kPoses);
  std::uniform_int_distribution<std::size_t> pick(0, trees.size() - 1);
  const double limit = deg2rad(spec.roll_pitch_range_deg);
  constexpr int kAttempts = 64;
  constexpr double kBorder = 0.5;
  constexpr double kClearance = 0.3;

  std::vector<CameraPose> poses;
  poses.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::optional<CameraPose> chosen;
    CameraPose fallback;
    for (int attempt = 0; attempt < kAttempts && !chosen; ++attempt) {
      const TreeInstance& t = trees[pick(rng)];
      const double standoff = uniform(rng, spec.standoff_range);
      const double az = uniform(rng, 0.0, 2.0 * kPi);
      const double roll = limit > 0.0 ? uniform(rng, -limit, limit) : 0.0;
      const double x = t.base_position.x + standoff * std::cos(az);
      const double y = t.base_position.y + standoff * std::sin(az);
      const Vec3 cam{x, y, terrain.height(x, y) + spec.camera_height};
      const double s_eye = std::clamp(t.s_at_height(cam.z), 0.0, t.height);
      if (attempt == 0) {
        fallback = look_at(cam, t.axis_point(s_eye), roll, k);
        fallback.pitch = std::clamp(fallback.pitch, -limit, limit);
        fallback.target_tree = t.id;
      }
      if (x < kBorder || y < kBorder || x > terrain.extent_x() - kBorder ||
          y > terrain.extent_y() - kBorder) {
        continue;
      }
      const bool inside_trunk = std::any_of(trees.begin(), trees.end(), [&](const TreeInstance& o) {
        const Vec3 a = o.axis_point(std::clamp(o.s_at_height(cam.z), 0.0, o.height));
        return std::hypot(a.x - cam.x, a.y - cam.y) < o.trunk_radius + kClearance;
      });
      if (inside_trunk) continue;
      // Aim at a point on the lower stem whose elevation keeps pitch in range.
      for (int tries = 0; tries < 16; ++tries) {
        const double s = uniform(rng, 0.3, std::max(0.31, std::min(t.height, 5.0)));
        CameraPose p = look_at(cam, t.axis_point(s), roll, k);
        if (std::abs(p.pitch) <= limit) {
          p.target_tree = t.id;
          chosen = p;
          break;
        }
      }
    }
    poses.push_back(chosen ? *chosen : fallback);
  }
  return poses;
}

int scene_frame_count(std::size_t tree_count, const FrameBand& band) {
  const double raw = std::round(band.frames_per_tree * double(tree_count));
  return static_cast<int>(std::clamp(raw, double(band.min_frames), double(band.max_frames)));
}

}  // namespace timberlens
