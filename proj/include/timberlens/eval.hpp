#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "timberlens/common.hpp"
#include "timberlens/dataset.hpp"
#include "timberlens/mask.hpp"

namespace timberlens {

enum class IouKind { kBox, kMask };

/// One predicted instance. Masks are held as RLE in the image frame.
struct Detection {
  std::int64_t image_id = 0;
  std::int64_t category_id = 1;
  BBox bbox;
  std::optional<Rle> mask;
  std::optional<KeypointSet> keypoints;
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Ground-truth instance as seen by the matcher.
struct GroundTruth {
  std::int64_t image_id = 0;
  std::int64_t id = 0;
  BBox bbox;
  std::optional<Rle> mask;
  bool iscrowd = false;
};

/// Strictly increasing IoU thresholds in (0, 1].
class IouThresholds {
 public:
  explicit IouThresholds(std::vector<double> values);
  /// 0.50, 0.55, ..., 0.95 (ten values).
  static IouThresholds canonical();
  static IouThresholds single(double t) { return IouThresholds({t}); }

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

double iou_box(const BBox& a, const BBox& b);

enum class MatchState : std::uint8_t { kFalsePositive, kTruePositive, kIgnored };

/// Greedy assignment for one image, per threshold. Detection and GT slots are
/// in input order.
struct MatchResult {
  std::vector<double> thresholds;
  std::vector<std::vector<MatchState>> det_state;    // [t][det]
  std::vector<std::vector<int>> det_gt;              // [t][det], -1 when unmatched
  std::vector<std::vector<bool>> gt_matched;         // [t][gt]
  std::vector<std::size_t> false_negatives;          // [t], non-crowd GTs left over

  std::size_t true_positives(std::size_t t) const;
};

/// Detections are visited by descending score (ties keep input order); each
/// claims the unmatched non-crowd GT with the highest IoU >= threshold, ties
/// going to the lower GT index. A detection that only overlaps a crowd region
/// (intersection over detection area >= threshold) is ignored rather than
/// counted as a false positive.
MatchResult match_greedy(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                         std::span<const double> thresholds, IouKind kind);
MatchResult match_greedy(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                         double threshold, IouKind kind);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
  double score = 0.0;
};

inline constexpr int kRecallSamples = 101;

struct PRCurve {
  double iou_threshold = 0.0;
  std::vector<PRPoint> points;
  std::array<double, kRecallSamples> interpolated{};
};

enum class RecallConvention {
  kMaxRecall,   // max recall over cutoffs with non-zero precision
  kCocoMaxDets  // same, after capping detections per image (COCO AR@maxDets)
};

struct EvalOptions {
  std::optional<std::size_t> max_dets;  // per image; unlimited by default
  RecallConvention recall = RecallConvention::kMaxRecall;
  std::size_t coco_max_dets = 100;
  unsigned threads = 1;
};

struct ThresholdResult {
  double threshold = 0.0;
  std::optional<double> ap;      // absent when there is no ground truth
  std::optional<double> recall;  // max recall with non-zero precision
  PRCurve curve;
};

struct TaskResult {
  std::vector<ThresholdResult> per_threshold;
  std::size_t num_gt = 0;
  std::size_t num_dets = 0;

  /// Mean over thresholds; absent when any threshold is.
  std::optional<double> mean_ap() const;
  std::optional<double> mean_recall() const;
};

/// Dataset-wide evaluation for one IoU kind: per-image greedy matching, then
/// a single PR construction over all detections pooled by
/// (score desc, image_id asc, input index asc).
TaskResult evaluate_task(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                         const IouThresholds& thresholds, IouKind kind,
                         const EvalOptions& options = {});

std::optional<double> average_precision(std::span<const Detection> dets,
                                        std::span<const GroundTruth> gts, double threshold,
                                        IouKind kind, const EvalOptions& options = {});
std::optional<double> ap_range(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                               const IouThresholds& thresholds, IouKind kind,
                               const EvalOptions& options = {});
std::optional<double> average_recall(std::span<const Detection> dets,
                                     std::span<const GroundTruth> gts,
                                     const IouThresholds& thresholds, IouKind kind,
                                     const EvalOptions& options = {});

/// Headline metric suite, percentages in [0, 100].
struct EvalSummary {
  std::optional<double> ap50_bb, ap5095_bb, ap50_seg, ap5095_seg;
  std::optional<double> ar50_bb, ar5095_bb, ar50_seg, ar5095_seg;
  std::vector<PRCurve> pr_curves_bb;
  std::vector<PRCurve> pr_curves_seg;
  std::size_t num_images = 0;
  std::size_t num_gt = 0;
  std::size_t num_dets = 0;
};

/// Names of the eight headline columns, in table order.
inline constexpr std::array<const char*, 8> kSummaryColumns = {
    "AP50_bb", "AP5095_bb", "AP50_seg", "AP5095_seg",
    "AR50_bb", "AR5095_bb", "AR50_seg", "AR5095_seg"};

std::array<std::optional<double>, 8> summary_values(const EvalSummary& s);
EvalSummary summary_from_values(const std::array<std::optional<double>, 8>& values);

/// Raised when predictions reference images the dataset does not have.
class UnknownImageError : public FormatError {
 public:
  explicit UnknownImageError(std::vector<std::int64_t> ids);
  const std::vector<std::int64_t>& ids() const { return ids_; }

 private:
  std::vector<std::int64_t> ids_;
};

/// Ground truth of the "tree" category (every category when none is named
/// "tree"), masks rasterised to RLE.
std::vector<GroundTruth> ground_truth_from(const DatasetIndex& index);

/// Box and mask metrics. Mask metrics are absent when no prediction carries
/// a mask or no ground truth carries a segmentation.
EvalSummary evaluate(const DatasetIndex& index, std::span<const Detection> predictions,
                     const EvalOptions& options = {});

nlohmann::json to_json(const EvalSummary& summary);
EvalSummary summary_from_json(const nlohmann::json& j);

/// Two-line plain-text table: header plus one row of values to one decimal,
/// "-" for absent entries.
std::string format_summary_table(const EvalSummary& summary, const std::string& label);

/// Detection JSON: a COCO results array. Polygon masks are rasterised
/// against the image size; keypoints accept 15 (u, v, flag) or 10 (u, v)
/// numbers. Throws DatasetParseError listing every bad record.
std::vector<Detection> parse_detections(const nlohmann::json& doc, const DatasetIndex& index);
std::vector<Detection> read_detections(const std::filesystem::path& path,
                                       const DatasetIndex& index);
nlohmann::json detections_to_json(std::span<const Detection> dets);
/// One detection per line, keys sorted.
std::string dump_detections(std::span<const Detection> dets);

}  // namespace timberlens
