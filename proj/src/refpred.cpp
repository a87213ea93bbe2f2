#include "timberlens/refpred.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "timberlens/synth.hpp"

namespace timberlens {

using nlohmann::json;

void validate(const NoiseModel& n) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(n.p_fn)) throw ValidationError("p_fn must lie in [0, 1]");
  if (!(n.lambda_fp >= 0.0) || !std::isfinite(n.lambda_fp)) {
    throw ValidationError("lambda_fp must be a finite value >= 0");
  }
  if (!(n.sigma_b >= 0.0) || !std::isfinite(n.sigma_b)) throw ValidationError("sigma_b must be >= 0");
  if (!(n.sigma_k >= 0.0) || !std::isfinite(n.sigma_k)) throw ValidationError("sigma_k must be >= 0");
  if (std::abs(n.mask_px) > 64) throw ValidationError("mask_px must lie in [-64, 64]");
}

json to_json(const NoiseModel& n) {
  return {{"p_fn", n.p_fn},
          {"drop_by_occlusion", n.drop_by_occlusion},
          {"lambda_fp", n.lambda_fp},
          {"sigma_b", n.sigma_b},
          {"sigma_k", n.sigma_k},
          {"mask_px", n.mask_px},
          {"score_model", n.score_model == ScoreModel::kUniform ? "uniform" : "iou_proportional"},
          {"seed", n.seed}};
}

NoiseModel noise_model_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("noise model: expected an object");
  NoiseModel n;
  auto number = [](const json& v, const std::string& key) {
    if (!v.is_number()) throw ValidationError(key + ": expected a number, got " + v.dump());
    return v.get<double>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "p_fn") {
      n.p_fn = number(v, key);
    } else if (key == "drop_by_occlusion") {
      if (!v.is_boolean()) throw ValidationError(key + ": expected a boolean");
      n.drop_by_occlusion = v.get<bool>();
    } else if (key == "lambda_fp") {
      n.lambda_fp = number(v, key);
    } else if (key == "sigma_b") {
      n.sigma_b = number(v, key);
    } else if (key == "sigma_k") {
      n.sigma_k = number(v, key);
    } else if (key == "mask_px") {
      if (!v.is_number_integer()) throw ValidationError(key + ": expected an integer");
      n.mask_px = v.get<int>();
    } else if (key == "score_model") {
      const auto s = v.is_string() ? v.get<std::string>() : std::string();
      if (s == "uniform") {
        n.score_model = ScoreModel::kUniform;
      } else if (s == "iou_proportional") {
        n.score_model = ScoreModel::kIouProportional;
      } else {
        throw ValidationError("score_model: expected \"uniform\" or \"iou_proportional\"");
      }
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) throw ValidationError("seed: expected a non-negative integer");
      n.seed = v.get<std::uint64_t>();
    } else {
      throw ValidationError("noise model: unknown key \"" + key + "\"");
    }
  }
  validate(n);
  return n;
}

namespace {

BBox jitter_box(const BBox& b, double sigma, int width, int height, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  double x0 = b.x + sigma * n01(rng);
  double y0 = b.y + sigma * n01(rng);
  double x1 = b.x2() + sigma * n01(rng);
  double y1 = b.y2() + sigma * n01(rng);
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  if (sigma == 0.0) return b;
  const double w = width, h = height;
  x0 = std::clamp(x0, 0.0, w - 1.0);
  y0 = std::clamp(y0, 0.0, h - 1.0);
  x1 = std::clamp(x1, x0 + 1.0, w);
  y1 = std::clamp(y1, y0 + 1.0, h);
  return {x0, y0, x1 - x0, y1 - y0};
}

Mask box_mask(const BBox& b, int width, int height) {
  Mask m(width, height);
  const int x0 = std::clamp(static_cast<int>(std::ceil(b.x - 0.5)), 0, width);
  const int x1 = std::clamp(static_cast<int>(std::ceil(b.x2() - 0.5)), 0, width);
  const int y0 = std::clamp(static_cast<int>(std::ceil(b.y - 0.5)), 0, height);
  const int y1 = std::clamp(static_cast<int>(std::ceil(b.y2() - 0.5)), 0, height);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.at(x, y) = 1;
  }
  return m;
}

}  // namespace

std::vector<Detection> perturb(const DatasetIndex& index, const NoiseModel& noise) {
  validate(noise);
  const auto tree_id = index.tree_category_id();
  std::map<std::int64_t, std::vector<const AnnotationRecord*>> by_image;
  for (const auto& img : index.images) by_image[img.id];
  for (const auto& a : index.annotations) {
    if (a.iscrowd || (tree_id && a.category_id != *tree_id)) continue;
    by_image[a.image_id].push_back(&a);
  }

  std::vector<Detection> out;
  for (const auto& [image_id, anns] : by_image) {
    const ImageRecord* img = index.find_image(image_id);
    if (!img) continue;
    auto rng = make_rng(noise.seed, static_cast<std::uint64_t>(image_id));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    const bool any_mask = std::any_of(anns.begin(), anns.end(),
                                      [](const AnnotationRecord* a) { return a->segmentation.has_value(); });

    for (const AnnotationRecord* a : anns) {
      const double p_drop = noise.drop_by_occlusion && a->occlusion_tree ? *a->occlusion_tree : noise.p_fn;
      const double u = u01(rng);
      if (u < p_drop) continue;

      Detection d;
      d.image_id = image_id;
      d.category_id = a->category_id;
      d.bbox = jitter_box(a->bbox, noise.sigma_b, img->width, img->height, rng);
      const double score_draw = u01(rng);
      d.score = noise.score_model == ScoreModel::kUniform ? score_draw : iou_box(d.bbox, a->bbox);

      if (a->keypoints) {
        KeypointSet kps = *a->keypoints;
        for (auto& kp : kps) {
          const double du = n01(rng), dv = n01(rng);
          if (kp.flag == KeypointFlag::kAbsent) continue;
          kp.u += noise.sigma_k * du;
          kp.v += noise.sigma_k * dv;
        }
        d.keypoints = kps;
      }
      if (auto m = annotation_mask(*a, *img)) {
        d.mask = encode_rle(noise.mask_px != 0 ? morph(*m, noise.mask_px) : *m);
      }
      out.push_back(std::move(d));
    }

    const long spurious = noise.lambda_fp > 0.0
                              ? std::poisson_distribution<long>(noise.lambda_fp)(rng)
                              : 0L;
    const double lo = std::log(kSpuriousMinSide), hi = std::log(kSpuriousMaxSide);
    for (long i = 0; i < spurious; ++i) {
      const double w = std::min(std::exp(lo + (hi - lo) * u01(rng)), double(img->width));
      const double h = std::min(std::exp(lo + (hi - lo) * u01(rng)), double(img->height));
      const double x = (img->width - w) * u01(rng);
      const double y = (img->height - h) * u01(rng);
      Detection d;
      d.image_id = image_id;
      d.category_id = tree_id.value_or(1);
      d.bbox = {x, y, w, h};
      const double s = u01(rng);
      d.score = noise.score_model == ScoreModel::kUniform ? s : 0.5 * s;
      if (any_mask) d.mask = encode_rle(box_mask(d.bbox, img->width, img->height));
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::vector<Detection> naive_depth_detector(const DepthImage& depth, std::int64_t image_id,
                                            const CameraIntrinsics& k,
                                            const DepthDetectorOptions& o) {
  const int w = depth.width, h = depth.height;
  auto usable = [&](int x, int y) {
    const float z = depth.at(x, y);
    return std::isfinite(z) && z >= o.min_depth && z <= o.max_depth;
  };
  auto vertical = [&](int x, int y) {
    if (!usable(x, y)) return false;
    const double z = depth.at(x, y);
    const double tol = o.slope_tolerance * z / k.fy;
    const bool up = y > 0 && usable(x, y - 1) && std::abs(depth.at(x, y - 1) - z) < tol;
    const bool down = y + 1 < h && usable(x, y + 1) && std::abs(depth.at(x, y + 1) - z) < tol;
    return up || down;
  };

  struct Run {
    int x, y0, y1;  // inclusive rows
    double z;
  };
  const int min_run = std::max(3, static_cast<int>(std::lround(o.min_run_fraction * h)));
  std::vector<Run> runs;
  std::vector<std::size_t> column_start(static_cast<std::size_t>(w) + 1, 0);
  for (int x = 0; x < w; ++x) {
    column_start[x] = runs.size();
    int y = 0;
    while (y < h) {
      if (!vertical(x, y)) {
        ++y;
        continue;
      }
      const int y0 = y;
      double sum = depth.at(x, y);
      while (y + 1 < h && vertical(x, y + 1) &&
             std::abs(depth.at(x, y + 1) - depth.at(x, y)) < 0.1) {
        ++y;
        sum += depth.at(x, y);
      }
      if (y - y0 + 1 >= min_run) runs.push_back({x, y0, y, sum / (y - y0 + 1)});
      ++y;
    }
  }
  column_start[w] = runs.size();

  std::vector<std::size_t> parent(runs.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int x = 1; x < w; ++x) {
    for (std::size_t a = column_start[x]; a < column_start[x + 1]; ++a) {
      for (std::size_t b = column_start[x - 1]; b < column_start[x]; ++b) {
        const bool overlap = runs[a].y0 <= runs[b].y1 && runs[b].y0 <= runs[a].y1;
        if (overlap && std::abs(runs[a].z - runs[b].z) < o.column_depth_gap) {
          const std::size_t ra = find(a), rb = find(b);
          if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
      }
    }
  }

  struct Cluster {
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
    std::size_t pixels = 0;
  };
  std::map<std::size_t, Cluster> clusters;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    Cluster& c = clusters[find(i)];
    c.x0 = std::min(c.x0, runs[i].x);
    c.x1 = std::max(c.x1, runs[i].x);
    c.y0 = std::min(c.y0, runs[i].y0);
    c.y1 = std::max(c.y1, runs[i].y1);
    c.pixels += static_cast<std::size_t>(runs[i].y1 - runs[i].y0 + 1);
  }

  std::vector<Detection> out;
  for (const auto& [root, c] : clusters) {
    const int bw = c.x1 - c.x0 + 1, bh = c.y1 - c.y0 + 1;
    if (bw < 2 || bh < bw) continue;
    Detection d;
    d.image_id = image_id;
    d.bbox = {double(c.x0), double(c.y0), double(bw), double(bh)};
    d.score = double(c.pixels) / (double(bw) * double(bh));
    out.push_back(d);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return out;
}

}  // namespace timberlens
