#include <algorithm>
#include <cmath>
#include <cstdio>

#include "raster.hpp"
#include "timberlens/parallel.hpp"

namespace timberlens {

using nlohmann::json;

namespace {

struct PixelCounts {
  std::size_t trunk = 0;
  std::size_t base = 0;
};

std::vector<PixelCounts> count_trunk_pixels(const std::vector<std::uint32_t>& ids,
                                            std::size_t n_trees) {
  std::vector<PixelCounts> out(n_trees);
  for (const auto id : ids) {
    if (!surface::is_trunk(id)) continue;
    const int t = surface::trunk_tree(id);
    if (t < 0 || static_cast<std::size_t>(t) >= n_trees) continue;
    ++out[t].trunk;
    if (surface::is_base_band(id)) ++out[t].base;
  }
  return out;
}

PixelCounts count_tree(const std::vector<std::uint32_t>& ids, int tree_id) {
  PixelCounts c;
  for (const auto id : ids) {
    if (surface::is_trunk(id) && surface::trunk_tree(id) == tree_id) {
      ++c.trunk;
      if (surface::is_base_band(id)) ++c.base;
    }
  }
  return c;
}

struct Projected {
  bool in_front = false;
  double u = 0.0, v = 0.0;
};

Projected project_point(const CameraPose& pose, const Vec3& world) {
  const Vec3 c = pose.world_to_camera(world);
  if (c.z <= detail::kNearPlane) return {};
  const auto& k = pose.intrinsics;
  return {true, k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy};
}

bool in_frame(const Projected& p, int w, int h) {
  return p.in_front && p.u >= -0.5 && p.v >= -0.5 && p.u < w - 0.5 && p.v < h - 0.5;
}

Keypoint2D make_keypoint(const Projected& p, const RenderedFrame& frame, int tree_id,
                         double nudge_u = 0.0) {
  if (!in_frame(p, frame.width, frame.height)) return {};
  const int x = std::clamp(static_cast<int>(std::lround(p.u + nudge_u)), 0, frame.width - 1);
  const int y = std::clamp(static_cast<int>(std::lround(p.v)), 0, frame.height - 1);
  const std::uint32_t id = frame.id_at(x, y);
  const bool visible = surface::is_trunk(id) && surface::trunk_tree(id) == tree_id;
  return {p.u, p.v, visible ? KeypointFlag::kVisible : KeypointFlag::kOccluded};
}

KeypointSet place_keypoints(const Scene& scene, const TreeInstance& tree, const CameraPose& pose,
                            const RenderedFrame& frame) {
  const double s_fc = detail::felling_cut_s(scene, tree);
  const Vec3 c = tree.axis_point(s_fc);
  const double r = tree.radius_at(s_fc);

  // Silhouette tangent points of the cross-section circle at the cut height.
  const Vec3 w = pose.position - c;
  const Vec3 w_perp = w - tree.lean * dot(w, tree.lean);
  const double d = norm(w_perp);
  Vec3 left, right;
  if (d > r) {
    const Vec3 e = w_perp * (1.0 / d);
    const Vec3 side = normalized(cross(tree.lean, e));
    const Vec3 toward = c + e * (r * r / d);
    const double half = r * std::sqrt(d * d - r * r) / d;
    left = toward + side * half;
    right = toward - side * half;
  } else {
    Vec3 side = cross(tree.lean, Vec3{0, 0, 1});
    side = norm(side) > 1e-9 ? normalized(side) : Vec3{1, 0, 0};
    left = c + side * r;
    right = c - side * r;
  }

  Projected pl = project_point(pose, left), pr = project_point(pose, right);
  if (pl.in_front && pr.in_front && pl.u > pr.u) std::swap(pl, pr);

  KeypointSet kps;
  kps[kFellingCut] = make_keypoint(project_point(pose, c), frame, tree.id);
  kps[kDiameterLeft] = make_keypoint(pl, frame, tree.id, +1.0);
  kps[kDiameterRight] = make_keypoint(pr, frame, tree.id, -1.0);
  kps[kInclinationMid] = make_keypoint(
      project_point(pose, tree.axis_point(s_fc + detail::kInclinationStep)), frame, tree.id);
  kps[kInclinationTop] = make_keypoint(
      project_point(pose, tree.axis_point(s_fc + 2.0 * detail::kInclinationStep)), frame, tree.id);
  return kps;
}

}  // namespace

std::vector<InstanceAnnotation> annotate(const Scene& scene, const CameraPose& pose,
                                         const RenderedFrame& frame,
                                         const RenderOptions& render_options,
                                         const AnnotateOptions& options) {
  std::vector<InstanceAnnotation> out;
  const auto visible = count_trunk_pixels(frame.ids, scene.trees.size());
  RenderOptions ro = render_options;
  ro.width = frame.width;
  ro.height = frame.height;
  std::optional<detail::Raster> ground;

  for (const auto& tree : scene.trees) {
    const Vec3 base = tree.axis_point(std::max(0.0, detail::ground_s(scene, tree)));
    const double distance = norm(base - pose.position);
    if (distance > options.max_distance) continue;
    const PixelCounts vis = visible[tree.id];
    if (vis.trunk == 0) continue;

    if (!ground) ground = detail::terrain_layer(scene, pose, ro);
    const detail::Raster solo = detail::solo_raster(scene, tree.id, pose, *ground);
    const PixelCounts all = count_tree(solo.ids, tree.id);
    if (all.trunk == 0) continue;

    InstanceAnnotation a;
    a.tree_id = tree.id;
    a.distance_m = distance;
    a.occlusion_tree = std::clamp(1.0 - double(vis.trunk) / double(all.trunk), 0.0, 1.0);
    if (a.occlusion_tree > options.max_occlusion) continue;
    if (all.base > 0) {
      a.occlusion_base = std::clamp(1.0 - double(vis.base) / double(all.base), 0.0, 1.0);
    }

    a.mask = Mask(frame.width, frame.height);
    for (std::size_t i = 0; i < frame.ids.size(); ++i) {
      const auto id = frame.ids[i];
      a.mask.data[i] = surface::is_trunk(id) && surface::trunk_tree(id) == tree.id;
    }
    a.bbox = *mask_bbox(a.mask);
    a.keypoints = place_keypoints(scene, tree, pose, frame);
    out.push_back(std::move(a));
  }
  return out;
}

json to_json(const GenerateOptions& o) {
  return {{"frames_per_scene", o.frames_per_scene ? json(*o.frames_per_scene) : json(nullptr)},
          {"min_frames", o.band.min_frames},
          {"max_frames", o.band.max_frames},
          {"frames_per_tree", o.band.frames_per_tree},
          {"width", o.width},
          {"height", o.height},
          {"max_distance", o.annotate.max_distance},
          {"max_occlusion", o.annotate.max_occlusion}};
}

GenerateOptions generate_options_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("generate options: expected an object");
  GenerateOptions o;
  auto integer = [](const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ValidationError(key + ": expected an integer");
    return v.get<int>();
  };
  auto number = [](const json& v, const std::string& key) {
    if (!v.is_number()) throw ValidationError(key + ": expected a number");
    return v.get<double>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "frames_per_scene") {
      if (!v.is_null()) o.frames_per_scene = integer(v, key);
    } else if (key == "min_frames") {
      o.band.min_frames = integer(v, key);
    } else if (key == "max_frames") {
      o.band.max_frames = integer(v, key);
    } else if (key == "frames_per_tree") {
      o.band.frames_per_tree = number(v, key);
    } else if (key == "width") {
      o.width = integer(v, key);
    } else if (key == "height") {
      o.height = integer(v, key);
    } else if (key == "max_distance") {
      o.annotate.max_distance = number(v, key);
    } else if (key == "max_occlusion") {
      o.annotate.max_occlusion = number(v, key);
    } else {
      throw ValidationError("generate options: unknown key \"" + key + "\"");
    }
  }
  return o;
}

namespace {

void validate(const GenerateOptions& o) {
  if (o.width < 16 || o.height < 16 || o.width > 8192 || o.height > 8192) {
    throw ValidationError("resolution must lie in [16, 8192] per side");
  }
  if (o.frames_per_scene && *o.frames_per_scene < 0) {
    throw ValidationError("frames_per_scene must be >= 0");
  }
  if (o.band.min_frames < 1 || o.band.min_frames > o.band.max_frames) {
    throw ValidationError("frame band must satisfy 1 <= min_frames <= max_frames");
  }
  if (!(o.band.frames_per_tree > 0.0)) throw ValidationError("frames_per_tree must be > 0");
  if (!(o.annotate.max_distance > 0.0)) throw ValidationError("max_distance must be > 0");
  if (o.annotate.max_occlusion < 0.0 || o.annotate.max_occlusion > 1.0) {
    throw ValidationError("max_occlusion must lie in [0, 1]");
  }
}

std::string frame_name(std::size_t scene, int frame) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "s%03zu_f%05d.png", scene, frame);
  return buf;
}

std::uint64_t frame_seed(std::uint64_t scene_seed, int frame) {
  return scene_seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(frame + 1));
}

void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace

GenerationResult generate_dataset(const std::vector<SceneSpec>& specs,
                                  const std::filesystem::path& out_dir,
                                  const GenerateOptions& options) {
  validate(options);
  for (const auto& s : specs) validate(s);
  ensure_dir(out_dir / "rgb");
  ensure_dir(out_dir / "depth");

  GenerationResult result;
  result.index.categories = {tree_category()};
  const CameraIntrinsics k = CameraIntrinsics::for_resolution(options.width, options.height);
  json scenes = json::array();
  std::int64_t next_image = 1, next_ann = 1;

  for (std::size_t si = 0; si < specs.size(); ++si) {
    const SceneSpec& spec = specs[si];
    const Scene scene = make_scene(spec);
    int n = options.frames_per_scene ? *options.frames_per_scene
                                     : scene_frame_count(scene.trees.size(), options.band);
    if (scene.trees.empty()) n = 0;
    const auto poses = n > 0 ? sample_camera_poses(scene.trees, scene.terrain, n, spec, k)
                             : std::vector<CameraPose>{};

    std::vector<std::vector<InstanceAnnotation>> anns(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
      RenderOptions ro;
      ro.width = options.width;
      ro.height = options.height;
      ro.noise_seed = frame_seed(spec.seed, static_cast<int>(i));
      const RenderedFrame frame = render(scene, poses[i], ro);
      anns[i] = annotate(scene, poses[i], frame, ro, options.annotate);
      const std::string name = frame_name(si, static_cast<int>(i));
      write_rgb(out_dir / "rgb" / name, frame.rgb);
      write_depth(out_dir / "depth" / name, frame.depth);
    });

    json images = json::array();
    std::size_t scene_anns = 0;
    for (int i = 0; i < n; ++i) {
      const std::string name = frame_name(si, i);
      ImageRecord img;
      img.id = next_image++;
      img.file_name = "rgb/" + name;
      img.depth_file_name = "depth/" + name;
      img.width = options.width;
      img.height = options.height;
      img.intrinsics = k;
      result.index.images.push_back(img);
      images.push_back(img.file_name);
      for (const auto& a : anns[i]) {
        AnnotationRecord r;
        r.id = next_ann++;
        r.image_id = img.id;
        r.category_id = 1;
        r.bbox = a.bbox;
        r.segmentation = encode_rle(a.mask);
        r.area = static_cast<double>(a.mask.area());
        r.keypoints = a.keypoints;
        r.num_keypoints = static_cast<int>(std::count_if(
            a.keypoints.begin(), a.keypoints.end(),
            [](const Keypoint2D& kp) { return kp.flag != KeypointFlag::kAbsent; }));
        r.occlusion_tree = a.occlusion_tree;
        r.occlusion_base = a.occlusion_base;
        r.distance_m = a.distance_m;
        result.index.annotations.push_back(std::move(r));
        ++scene_anns;
      }
    }
    result.scenes.push_back({spec.seed, scene.trees.size(), n, scene_anns});
    scenes.push_back({{"spec", to_json(spec)},
                      {"seed", spec.seed},
                      {"tree_count", scene.trees.size()},
                      {"frames", n},
                      {"annotations", scene_anns},
                      {"images", images}});
  }

  write_dataset(result.index, out_dir / kAnnotationFile);
  result.manifest = {{"generator", "timberlens"},
                     {"format_version", 1},
                     {"options", to_json(options)},
                     {"scenes", scenes},
                     {"total_frames", result.index.images.size()},
                     {"annotation_file", kAnnotationFile}};
  write_text_file(out_dir / kManifestFile, result.manifest.dump(2) + "\n");
  return result;
}

GenerationResult regenerate_from_manifest(const std::filesystem::path& manifest_path,
                                          const std::filesystem::path& out_dir, unsigned threads) {
  json m;
  try {
    m = json::parse(read_text_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (!m.is_object() || !m.contains("scenes") || !m["scenes"].is_array() ||
      !m.contains("options")) {
    throw FormatError(manifest_path.string() + ": not a generation manifest");
  }
  GenerateOptions options = generate_options_from_json(m["options"]);
  options.threads = threads;
  std::vector<SceneSpec> specs;
  for (const auto& s : m["scenes"]) {
    if (!s.contains("spec")) throw FormatError(manifest_path.string() + ": scene without spec");
    specs.push_back(scene_spec_from_json(s["spec"]));
  }
  return generate_dataset(specs, out_dir, options);
}

}  // namespace timberlens
