#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "timberlens/dataset.hpp"
#include "timberlens/eval.hpp"
#include "timberlens/stats.hpp"

namespace timberlens {

struct OcclusionBin {
  double lo = 0.0, hi = 0.0;
  std::size_t support_tree = 0, fn_tree = 0;
  std::size_t support_base = 0, fn_base = 0;

  std::optional<double> rate_tree() const {
    return support_tree ? std::optional<double>(double(fn_tree) / double(support_tree)) : std::nullopt;
  }
  std::optional<double> rate_base() const {
    return support_base ? std::optional<double>(double(fn_base) / double(support_base)) : std::nullopt;
  }
};

struct OcclusionReport {
  std::vector<OcclusionBin> bins;
  double iou_threshold = 0.5;
  std::size_t total_tree = 0;  // GTs with occlusion_tree
  std::size_t total_base = 0;  // GTs with occlusion_base
};

/// Bin index of an occlusion fraction: min(floor(o * bins), bins - 1).
int occlusion_bin(double occlusion, int bins);

/// False-negative rates per occlusion bin. A GT is a false negative when no
/// prediction claims it at box IoU >= iou_threshold. Throws ValidationError
/// when tree annotations lack occlusion_tree.
OcclusionReport occlusion_fn_rates(const DatasetIndex& index, std::span<const Detection> preds,
                                   int bins = 10, double iou_threshold = 0.5);

struct ScalingPoint {
  double n = 0.0;
  double ap = 0.0;
};

struct ScalingFit {
  std::vector<ScalingPoint> points;  // sorted by n
  LinearFit fit;                     // ap against log2 n

  double slope_per_doubling() const { return fit.slope; }
  double intercept() const { return fit.intercept; }
  double ci95_low() const { return fit.slope_ci_low(); }
  double ci95_high() const { return fit.slope_ci_high(); }
  /// 95 % band of the fitted mean at training size n.
  std::array<double, 2> band(double n) const;
};

/// Least squares on (log2 n, AP). Absent with fewer than 3 points or a
/// single distinct n; throws ValidationError for n <= 0.
std::optional<ScalingFit> scaling_fit(std::vector<ScalingPoint> points);

/// "AP gains 1.5 % per doubling of the training set (95 % CI 1.2 to 1.8)"
/// for one fit; a range "1.1 to 1.6 %" across several.
std::string scaling_summary(std::span<const ScalingFit> fits, const std::string& metric = "AP");

struct TransferMeta {
  std::string source_name = "source";
  std::string target_name = "target";
  std::optional<int> n_train;
};

struct TransferReport {
  TransferMeta meta;
  std::array<std::optional<double>, 8> source{}, target{}, delta{};
};

/// delta = target - source per column; absent where either side is.
TransferReport transfer_report(const EvalSummary& source, const EvalSummary& target,
                               const TransferMeta& meta = {});

/// "49.1↓41.3", "72.1↑0.1", "3.1 0.0"; "-" for absent.
std::string arrow_cell(std::optional<double> value, std::optional<double> delta);
std::string format_transfer_table(std::span<const TransferReport> rows);

struct EpochPoint {
  double epoch = 0.0;
  std::optional<double> source_ap;
  std::optional<double> target_ap;
};

/// Sorted by epoch (stable for ties); values are passed through untouched.
std::vector<EpochPoint> epoch_generalization_curve(std::vector<EpochPoint> points);

nlohmann::json to_json(const OcclusionReport& r);
nlohmann::json to_json(const ScalingFit& f);
nlohmann::json to_json(const TransferReport& r);
nlohmann::json epochs_to_json(std::span<const EpochPoint> points);

std::vector<ScalingPoint> scaling_points_from_json(const nlohmann::json& j);
std::vector<EpochPoint> epoch_points_from_json(const nlohmann::json& j);

}  // namespace timberlens
