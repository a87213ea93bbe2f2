#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "timberlens/common.hpp"
#include "timberlens/dataset.hpp"
#include "timberlens/eval.hpp"
#include "timberlens/image_io.hpp"
#include "timberlens/stats.hpp"

namespace timberlens {

/// Camera frame: x right, y down, z forward, meters.
struct Keypoint3D {
  double x = 0.0, y = 0.0, z = 0.0;
  Vec3 vec() const { return {x, y, z}; }
};

struct MissingDepthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Throws MissingDepthError for a non-positive or non-finite depth.
Keypoint3D backproject(double u, double v, double depth, const CameraIntrinsics& k);

struct PixelPoint {
  double u = 0.0, v = 0.0;
};
PixelPoint project(const Keypoint3D& p, const CameraIntrinsics& k);

/// What the depth lookup may fall back on for one ground-truth instance.
struct DepthContext {
  const DepthImage* depth = nullptr;
  const Mask* instance_mask = nullptr;          // GT mask, enables the fallback
  std::optional<double> instance_distance;      // enables the background test
};

inline constexpr double kBackgroundMargin = 1.0;  // m beyond the instance
inline constexpr int kFallbackRadius = 5;         // px

/// Depth at the nearest pixel. A missing sample, or one deeper than the
/// instance distance plus 1 m, falls back to the median of valid instance-
/// mask depths within a 5 px radius. nullopt when still unresolved.
std::optional<double> sample_depth(double u, double v, const DepthContext& ctx);

struct InstancePair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

/// Greedy box-IoU pairing at 0.5, per image, highest-scoring prediction
/// first. Pairs are ordered by image id, then by prediction rank.
std::vector<InstancePair> match_instances(std::span<const Detection> preds,
                                          std::span<const GroundTruth> gts,
                                          double iou_threshold = 0.5);

struct FellingCutError {
  double error_cm = 0.0;
  double dx_cm = 0.0;  // camera x (image horizontal), pred - gt
  double dy_cm = 0.0;  // camera y (image vertical, down positive), pred - gt
  double dz_cm = 0.0;
};

std::optional<FellingCutError> felling_cut_error(const Keypoint2D& pred, const Keypoint2D& gt,
                                                 const DepthContext& ctx,
                                                 const CameraIntrinsics& k);

/// |u_right - u_left| * z_mid / fx, z_mid sampled at the midpoint pixel.
std::optional<double> diameter_from_keypoints(const Keypoint2D& left, const Keypoint2D& right,
                                              const DepthContext& ctx,
                                              const CameraIntrinsics& k);

struct Inclination {
  double degrees_3d = 0.0;     // from camera up (-y), backprojected segment
  double degrees_image = 0.0;  // from image up, pixel segment
};

/// Throws ValidationError for a zero-length segment.
std::optional<Inclination> inclination_angle(const Keypoint2D& low, const Keypoint2D& high,
                                             const DepthContext& ctx, const CameraIntrinsics& k);

struct InstanceKeypointError {
  std::int64_t image_id = 0;
  std::int64_t gt_id = 0;
  std::size_t pred_index = 0;
  std::optional<double> distance_m;
  std::optional<FellingCutError> fc;
  std::optional<double> dia_pred_cm, dia_gt_cm, dia_error_cm;
  std::optional<double> inc_error_deg, inc_error_image_deg;
};

struct ErrorAggregate {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
};

struct KeypointErrorReport {
  std::vector<InstanceKeypointError> instances;
  std::size_t matched = 0;
  std::size_t unmatched_predictions = 0;
  std::size_t unmatched_gt = 0;
  std::size_t excluded_fc = 0;
  std::size_t excluded_dia = 0;
  std::size_t excluded_inc = 0;
  std::optional<ErrorAggregate> fc_error_cm, fc_dx_cm, fc_dy_cm, dia_error_cm, inc_error_deg,
      inc_error_image_deg;
};

struct KeypointEvalOptions {
  CameraIntrinsics default_intrinsics;
  double iou_threshold = 0.5;
};

using DepthLoader = std::function<std::optional<DepthImage>(const ImageRecord&)>;

/// Pairs predictions with ground truth and converts keypoint offsets to
/// metric errors. Instances whose depth cannot be resolved are excluded per
/// quantity and counted.
KeypointErrorReport keypoint_errors(const DatasetIndex& index, std::span<const Detection> preds,
                                    const DepthLoader& load_depth,
                                    const KeypointEvalOptions& options = {});

void aggregate(KeypointErrorReport& report);

inline constexpr double kMaxRange = 10.0;  // m, feller crane reach

struct DistanceBin {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
  double mean_error = 0.0;
};

struct ErrorVsDistance {
  std::vector<std::pair<double, double>> points;  // (distance m, error cm), in range
  std::vector<DistanceBin> bins;
  std::optional<LinearFit> fit;
  std::size_t excluded_beyond_range = 0;
};

/// Binned means plus a least-squares line of error against distance;
/// samples beyond max_distance are dropped.
ErrorVsDistance error_vs_distance(std::span<const std::pair<double, double>> samples,
                                  double max_distance = kMaxRange, double bin_width = 1.0);

nlohmann::json to_json(const KeypointErrorReport& report);
nlohmann::json to_json(const ErrorVsDistance& series);

/// One-line readout of the felling-cut offset medians, e.g.
/// "felling cut: median x = +0.00 cm, median y = +1.86 cm (n = 40)".
std::string format_fc_medians(const KeypointErrorReport& report);

}  // namespace timberlens
