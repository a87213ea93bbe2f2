#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "timberlens/dataset.hpp"
#include "timberlens/eval.hpp"
#include "timberlens/image_io.hpp"

namespace timberlens {

enum class ScoreModel { kUniform, kIouProportional };

/// Noise applied to ground truth to synthesize a prediction stream.
struct NoiseModel {
  double p_fn = 0.0;          // drop probability per GT
  bool drop_by_occlusion = false;  // use occlusion_tree as the drop probability
  double lambda_fp = 0.0;     // spurious boxes per image (Poisson mean)
  double sigma_b = 0.0;       // px, per box corner
  double sigma_k = 0.0;       // px, per keypoint coordinate
  int mask_px = 0;            // dilate (> 0) or erode (< 0)
  ScoreModel score_model = ScoreModel::kIouProportional;
  std::uint64_t seed = 0;
};

void validate(const NoiseModel& noise);
nlohmann::json to_json(const NoiseModel& noise);
/// Unknown keys and out-of-range values throw ValidationError.
NoiseModel noise_model_from_json(const nlohmann::json& j);

inline constexpr double kSpuriousMinSide = 16.0;
inline constexpr double kSpuriousMaxSide = 256.0;

/// Survivors keep their GT order within an image; spurious boxes follow.
/// Each image draws from its own stream seeded by (seed, image id).
std::vector<Detection> perturb(const DatasetIndex& index, const NoiseModel& noise);

struct DepthDetectorOptions {
  double min_depth = 0.5;
  double max_depth = 12.0;
  double slope_tolerance = 0.4;  // allowed |dz/dv| as a fraction of z / fy
  double min_run_fraction = 15.0 / 720.0;  // of image height
  double column_depth_gap = 0.3;  // m, merge tolerance between columns
};

/// Boxes around clusters of near-constant-depth vertical column runs.
/// Score is cluster pixel count over box area. No masks or keypoints.
std::vector<Detection> naive_depth_detector(const DepthImage& depth, std::int64_t image_id,
                                            const CameraIntrinsics& k,
                                            const DepthDetectorOptions& options = {});

}  // namespace timberlens
