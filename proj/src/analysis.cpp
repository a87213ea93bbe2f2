#include "timberlens/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace timberlens {

using nlohmann::json;

int occlusion_bin(double occlusion, int bins) {
  const int b = static_cast<int>(std::floor(std::clamp(occlusion, 0.0, 1.0) * bins));
  return std::min(b, bins - 1);
}

OcclusionReport occlusion_fn_rates(const DatasetIndex& index, std::span<const Detection> preds,
                                   int bins, double iou_threshold) {
  if (bins < 1) throw ValidationError("occlusion bins must be >= 1");
  const auto tree_id = index.tree_category_id();

  std::map<std::int64_t, std::pair<std::vector<Detection>, std::vector<GroundTruth>>> by_image;
  std::map<std::int64_t, std::vector<const AnnotationRecord*>> anns;
  for (const auto& a : index.annotations) {
    if (tree_id && a.category_id != *tree_id) continue;
    if (!a.iscrowd && !a.occlusion_tree) {
      throw ValidationError("annotation " + std::to_string(a.id) +
                            " has no occlusion_tree; occlusion analysis needs a dataset from "
                            "the synthetic generator");
    }
    by_image[a.image_id].second.push_back({a.image_id, a.id, a.bbox, std::nullopt, a.iscrowd});
    anns[a.image_id].push_back(&a);
  }
  for (const auto& d : preds) {
    if (tree_id && d.category_id != *tree_id) continue;
    auto it = by_image.find(d.image_id);
    if (it != by_image.end()) it->second.first.push_back(d);
  }

  OcclusionReport r;
  r.iou_threshold = iou_threshold;
  r.bins.resize(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    r.bins[b].lo = double(b) / bins;
    r.bins[b].hi = double(b + 1) / bins;
  }
  for (const auto& [image_id, group] : by_image) {
    const auto& [dets, gts] = group;
    const MatchResult m = match_greedy(dets, gts, iou_threshold, IouKind::kBox);
    const auto& list = anns[image_id];
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].iscrowd) continue;
      const bool missed = !m.gt_matched[0][g];
      OcclusionBin& bt = r.bins[occlusion_bin(*list[g]->occlusion_tree, bins)];
      ++bt.support_tree;
      bt.fn_tree += missed;
      ++r.total_tree;
      if (list[g]->occlusion_base) {
        OcclusionBin& bb = r.bins[occlusion_bin(*list[g]->occlusion_base, bins)];
        ++bb.support_base;
        bb.fn_base += missed;
        ++r.total_base;
      }
    }
  }
  return r;
}

std::array<double, 2> ScalingFit::band(double n) const {
  const double x = std::log2(n);
  const double m = fit.predict(x), se = fit.mean_se(x);
  return {m - kZ95 * se, m + kZ95 * se};
}

std::optional<ScalingFit> scaling_fit(std::vector<ScalingPoint> points) {
  for (const auto& p : points) {
    if (!(p.n > 0.0) || !std::isfinite(p.n)) {
      throw ValidationError("training size must be > 0, got " + std::to_string(p.n));
    }
    if (!std::isfinite(p.ap)) throw ValidationError("AP values must be finite");
  }
  std::stable_sort(points.begin(), points.end(), [](const ScalingPoint& a, const ScalingPoint& b) {
    return a.n < b.n || (a.n == b.n && a.ap < b.ap);
  });
  std::vector<double> x, y;
  for (const auto& p : points) {
    x.push_back(std::log2(p.n));
    y.push_back(p.ap);
  }
  auto fit = fit_line(x, y);
  if (!fit) return std::nullopt;
  return ScalingFit{std::move(points), *fit};
}

namespace {

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return std::string(buf) == "-0.0" ? "0.0" : buf;
}

}  // namespace

std::string scaling_summary(std::span<const ScalingFit> fits, const std::string& metric) {
  if (fits.empty()) return "no scaling fit available";
  if (fits.size() == 1) {
    const auto& f = fits.front();
    const double s = f.slope_per_doubling();
    return metric + (s >= 0 ? " gains " : " changes by ") + fixed1(s) +
           " % per doubling of the training set (95 % CI " + fixed1(f.ci95_low()) + " to " +
           fixed1(f.ci95_high()) + ")";
  }
  double lo = fits.front().slope_per_doubling(), hi = lo;
  for (const auto& f : fits) {
    lo = std::min(lo, f.slope_per_doubling());
    hi = std::max(hi, f.slope_per_doubling());
  }
  const std::string range = fixed1(lo) == fixed1(hi) ? fixed1(lo) : fixed1(lo) + " to " + fixed1(hi);
  return metric + (lo >= 0 ? " gains " : " changes by ") + range +
         " % per doubling of the training set";
}

TransferReport transfer_report(const EvalSummary& source, const EvalSummary& target,
                               const TransferMeta& meta) {
  TransferReport r;
  r.meta = meta;
  r.source = summary_values(source);
  r.target = summary_values(target);
  for (std::size_t i = 0; i < r.delta.size(); ++i) {
    if (r.source[i] && r.target[i]) r.delta[i] = *r.target[i] - *r.source[i];
  }
  return r;
}

std::string arrow_cell(std::optional<double> value, std::optional<double> delta) {
  if (!value) return "-";
  std::string s = fixed1(*value);
  if (!delta) return s;
  const std::string mag = fixed1(std::abs(*delta));
  if (mag == "0.0") return s + " 0.0";
  return s + (*delta > 0 ? "↑" : "↓") + mag;
}

std::string format_transfer_table(std::span<const TransferReport> rows) {
  std::string out = "Transfer | # train";
  for (const char* c : kSummaryColumns) out += std::string(" | src ") + c;
  for (const char* c : kSummaryColumns) out += std::string(" | tgt ") + c;
  out += "\n";
  for (const auto& r : rows) {
    out += r.meta.source_name + "→" + r.meta.target_name + " | " +
           (r.meta.n_train ? std::to_string(*r.meta.n_train) : std::string("-"));
    for (const auto& v : r.source) out += " | " + arrow_cell(v, std::nullopt);
    for (std::size_t i = 0; i < r.target.size(); ++i) out += " | " + arrow_cell(r.target[i], r.delta[i]);
    out += "\n";
  }
  return out;
}

std::vector<EpochPoint> epoch_generalization_curve(std::vector<EpochPoint> points) {
  std::stable_sort(points.begin(), points.end(),
                   [](const EpochPoint& a, const EpochPoint& b) { return a.epoch < b.epoch; });
  return points;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json values_json(const std::array<std::optional<double>, 8>& v) {
  json j = json::object();
  for (std::size_t i = 0; i < v.size(); ++i) j[kSummaryColumns[i]] = opt(v[i]);
  return j;
}

double number_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw FormatError(where + ": missing numeric \"" + key + "\"");
  }
  return j[key].get<double>();
}

std::optional<double> optional_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) throw FormatError(where + ": \"" + key + "\" must be a number or null");
  return j[key].get<double>();
}

}  // namespace

json to_json(const OcclusionReport& r) {
  json bins = json::array();
  for (const auto& b : r.bins) {
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"support_tree", b.support_tree},
                    {"fn_tree", b.fn_tree},
                    {"fn_rate_tree", opt(b.rate_tree())},
                    {"support_base", b.support_base},
                    {"fn_base", b.fn_base},
                    {"fn_rate_base", opt(b.rate_base())}});
  }
  return {{"iou_threshold", r.iou_threshold},
          {"total_tree", r.total_tree},
          {"total_base", r.total_base},
          {"bins", bins}};
}

json to_json(const ScalingFit& f) {
  json pts = json::array();
  for (const auto& p : f.points) {
    const auto b = f.band(p.n);
    pts.push_back({{"n", p.n}, {"ap", p.ap}, {"fitted", f.fit.predict(std::log2(p.n))},
                   {"band95", {b[0], b[1]}}});
  }
  return {{"points", pts},
          {"slope_per_doubling", f.slope_per_doubling()},
          {"intercept", f.intercept()},
          {"slope_se", f.fit.slope_se},
          {"slope_ci95", {f.ci95_low(), f.ci95_high()}},
          {"residual_sd", f.fit.residual_sd}};
}

json to_json(const TransferReport& r) {
  return {{"source_name", r.meta.source_name},
          {"target_name", r.meta.target_name},
          {"n_train", r.meta.n_train ? json(*r.meta.n_train) : json(nullptr)},
          {"source", values_json(r.source)},
          {"target", values_json(r.target)},
          {"delta", values_json(r.delta)}};
}

json epochs_to_json(std::span<const EpochPoint> points) {
  json arr = json::array();
  for (const auto& p : points) {
    arr.push_back({{"epoch", p.epoch}, {"source_ap", opt(p.source_ap)}, {"target_ap", opt(p.target_ap)}});
  }
  return {{"points", arr}};
}

std::vector<ScalingPoint> scaling_points_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("points") ? j["points"] : j;
  if (!arr.is_array()) throw FormatError("scaling input: expected an array of {n, ap}");
  std::vector<ScalingPoint> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "scaling point " + std::to_string(i);
    if (!arr[i].is_object()) throw FormatError(where + ": expected an object");
    out.push_back({number_field(arr[i], "n", where), number_field(arr[i], "ap", where)});
  }
  return out;
}

std::vector<EpochPoint> epoch_points_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("points") ? j["points"] : j;
  if (!arr.is_array()) throw FormatError("epoch input: expected an array of {epoch, source_ap, target_ap}");
  std::vector<EpochPoint> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "epoch point " + std::to_string(i);
    if (!arr[i].is_object()) throw FormatError(where + ": expected an object");
    out.push_back({number_field(arr[i], "epoch", where), optional_field(arr[i], "source_ap", where),
                   optional_field(arr[i], "target_ap", where)});
  }
  return out;
}

}  // namespace timberlens
