#include "timberlens/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "timberlens/parallel.hpp"

namespace timberlens {

using nlohmann::json;

IouThresholds::IouThresholds(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ValidationError("IoU threshold list is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0.0 && values_[i] <= 1.0)) {
      throw ValidationError("IoU thresholds must lie in (0, 1]");
    }
    if (i > 0 && !(values_[i] > values_[i - 1])) {
      throw ValidationError("IoU thresholds must be strictly increasing");
    }
  }
}

IouThresholds IouThresholds::canonical() {
  std::vector<double> v;
  for (int i = 0; i < 10; ++i) v.push_back((50 + 5 * i) / 100.0);
  return IouThresholds(std::move(v));
}

double iou_box(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::size_t MatchResult::true_positives(std::size_t t) const {
  return static_cast<std::size_t>(
      std::count(det_state[t].begin(), det_state[t].end(), MatchState::kTruePositive));
}

namespace {

// Overlap used for matching: plain IoU against regular GT, intersection over
// detection area against crowd regions.
double overlap(const Detection& d, const GroundTruth& g, IouKind kind) {
  if (kind == IouKind::kBox) {
    if (!g.iscrowd) return iou_box(d.bbox, g.bbox);
    const double iw = std::min(d.bbox.x2(), g.bbox.x2()) - std::max(d.bbox.x, g.bbox.x);
    const double ih = std::min(d.bbox.y2(), g.bbox.y2()) - std::max(d.bbox.y, g.bbox.y);
    if (iw <= 0.0 || ih <= 0.0 || d.bbox.area() <= 0.0) return 0.0;
    return iw * ih / d.bbox.area();
  }
  if (!d.mask || !g.mask) return 0.0;
  if (!g.iscrowd) return iou_rle(*d.mask, *g.mask);
  const std::size_t area = d.mask->area();
  return area == 0 ? 0.0 : double(intersection_rle(*d.mask, *g.mask)) / double(area);
}

// Matching over index subsets of shared arrays. Result slots follow the order
// of det_idx / gt_idx.
MatchResult match_indexed(const Detection* dets, const std::vector<std::size_t>& det_idx,
                          const GroundTruth* gts, const std::vector<std::size_t>& gt_idx,
                          std::span<const double> thresholds, IouKind kind) {
  const std::size_t nd = det_idx.size(), ng = gt_idx.size(), nt = thresholds.size();
  MatchResult r;
  r.thresholds.assign(thresholds.begin(), thresholds.end());
  r.det_state.assign(nt, std::vector<MatchState>(nd, MatchState::kFalsePositive));
  r.det_gt.assign(nt, std::vector<int>(nd, -1));
  r.gt_matched.assign(nt, std::vector<bool>(ng, false));
  r.false_negatives.assign(nt, 0);

  std::vector<double> ious(nd * ng);
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t g = 0; g < ng; ++g) {
      ious[d * ng + g] = overlap(dets[det_idx[d]], gts[gt_idx[g]], kind);
    }
  }
  std::vector<std::size_t> order(nd);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[det_idx[a]].score > dets[det_idx[b]].score;
  });

  for (std::size_t t = 0; t < nt; ++t) {
    const double thr = thresholds[t];
    auto& matched = r.gt_matched[t];
    for (std::size_t d : order) {
      int best = -1;
      double best_iou = -1.0;
      for (std::size_t g = 0; g < ng; ++g) {
        const GroundTruth& gt = gts[gt_idx[g]];
        if (gt.iscrowd || matched[g]) continue;
        const double v = ious[d * ng + g];
        if (v < thr) continue;
        if (v > best_iou || (v == best_iou && gt.id < gts[gt_idx[best]].id)) {
          best = static_cast<int>(g);
          best_iou = v;
        }
      }
      if (best >= 0) {
        matched[best] = true;
        r.det_state[t][d] = MatchState::kTruePositive;
        r.det_gt[t][d] = best;
        continue;
      }
      for (std::size_t g = 0; g < ng; ++g) {
        if (gts[gt_idx[g]].iscrowd && ious[d * ng + g] >= thr) {
          r.det_state[t][d] = MatchState::kIgnored;
          r.det_gt[t][d] = static_cast<int>(g);
          break;
        }
      }
    }
    for (std::size_t g = 0; g < ng; ++g) {
      if (!gts[gt_idx[g]].iscrowd && !matched[g]) ++r.false_negatives[t];
    }
  }
  return r;
}

struct PooledDet {
  double score;
  std::int64_t image_id;
  std::size_t input_index;
  std::vector<MatchState> states;  // per threshold
};

struct PooledMatches {
  std::vector<PooledDet> dets;  // globally sorted
  std::size_t num_gt = 0;
};

PooledMatches pool_matches(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                           std::span<const double> thresholds, IouKind kind,
                           std::optional<std::size_t> max_dets, unsigned threads) {
  std::map<std::int64_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_image;
  for (std::size_t i = 0; i < dets.size(); ++i) by_image[dets[i].image_id].first.push_back(i);
  for (std::size_t i = 0; i < gts.size(); ++i) by_image[gts[i].image_id].second.push_back(i);

  std::vector<const std::pair<std::vector<std::size_t>, std::vector<std::size_t>>*> groups;
  std::vector<std::int64_t> image_ids;
  for (auto& [id, group] : by_image) {
    if (max_dets && group.first.size() > *max_dets) {
      std::stable_sort(group.first.begin(), group.first.end(), [&](std::size_t a, std::size_t b) {
        return dets[a].score > dets[b].score;
      });
      group.first.resize(*max_dets);
      std::sort(group.first.begin(), group.first.end());
    }
    groups.push_back(&group);
    image_ids.push_back(id);
  }

  std::vector<MatchResult> results(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t i) {
    results[i] = match_indexed(dets.data(), groups[i]->first, gts.data(), groups[i]->second,
                               thresholds, kind);
  });

  PooledMatches pooled;
  for (const auto& g : gts) pooled.num_gt += g.iscrowd ? 0 : 1;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& det_idx = groups[i]->first;
    for (std::size_t d = 0; d < det_idx.size(); ++d) {
      PooledDet p{dets[det_idx[d]].score, image_ids[i], det_idx[d], {}};
      p.states.reserve(thresholds.size());
      for (std::size_t t = 0; t < thresholds.size(); ++t) p.states.push_back(results[i].det_state[t][d]);
      pooled.dets.push_back(std::move(p));
    }
  }
  std::sort(pooled.dets.begin(), pooled.dets.end(), [](const PooledDet& a, const PooledDet& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return a.input_index < b.input_index;
  });
  return pooled;
}

ThresholdResult curve_for(const PooledMatches& pooled, std::size_t t, double threshold) {
  ThresholdResult res;
  res.threshold = threshold;
  res.curve.iou_threshold = threshold;
  const std::size_t npos = pooled.num_gt;
  std::size_t tp = 0, fp = 0;
  std::vector<std::size_t> tps;
  for (const auto& d : pooled.dets) {
    const MatchState s = d.states[t];
    if (s == MatchState::kIgnored) continue;
    (s == MatchState::kTruePositive ? tp : fp) += 1;
    tps.push_back(tp);
    res.curve.points.push_back({npos ? double(tp) / double(npos) : 0.0,
                                double(tp) / double(tp + fp), d.score});
  }
  // Precision made non-increasing from the right; p_interp(r) is then the
  // value at the first point whose recall reaches r.
  std::vector<double> envelope(res.curve.points.size());
  double running = 0.0;
  for (std::size_t i = envelope.size(); i-- > 0;) {
    running = std::max(running, res.curve.points[i].precision);
    envelope[i] = running;
  }
  std::size_t k = 0;
  double sum = 0.0;
  for (int r = 0; r < kRecallSamples; ++r) {
    // recall >= r/100, in exact integer arithmetic
    while (k < tps.size() && tps[k] * 100 < static_cast<std::size_t>(r) * npos) ++k;
    const double p = (npos > 0 && k < tps.size()) ? envelope[k] : 0.0;
    res.curve.interpolated[r] = p;
    sum += p;
  }
  if (npos > 0) {
    res.ap = sum / kRecallSamples;
    res.recall = tp > 0 ? double(tp) / double(npos) : 0.0;
  }
  return res;
}

}  // namespace

MatchResult match_greedy(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                         std::span<const double> thresholds, IouKind kind) {
  std::vector<std::size_t> di(dets.size()), gi(gts.size());
  std::iota(di.begin(), di.end(), 0);
  std::iota(gi.begin(), gi.end(), 0);
  return match_indexed(dets.data(), di, gts.data(), gi, thresholds, kind);
}

MatchResult match_greedy(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                         double threshold, IouKind kind) {
  const double t[1] = {threshold};
  return match_greedy(dets, gts, std::span<const double>(t), kind);
}

std::optional<double> TaskResult::mean_ap() const {
  if (per_threshold.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& r : per_threshold) {
    if (!r.ap) return std::nullopt;
    sum += *r.ap;
  }
  return sum / double(per_threshold.size());
}

std::optional<double> TaskResult::mean_recall() const {
  if (per_threshold.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& r : per_threshold) {
    if (!r.recall) return std::nullopt;
    sum += *r.recall;
  }
  return sum / double(per_threshold.size());
}

TaskResult evaluate_task(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                         const IouThresholds& thresholds, IouKind kind,
                         const EvalOptions& options) {
  const auto& thr = thresholds.values();
  const PooledMatches pooled = pool_matches(dets, gts, thr, kind, options.max_dets, options.threads);
  TaskResult result;
  result.num_gt = pooled.num_gt;
  result.num_dets = dets.size();
  for (std::size_t t = 0; t < thr.size(); ++t) result.per_threshold.push_back(curve_for(pooled, t, thr[t]));

  if (options.recall == RecallConvention::kCocoMaxDets) {
    std::size_t cap = options.coco_max_dets;
    if (options.max_dets) cap = std::min(cap, *options.max_dets);
    const PooledMatches capped = pool_matches(dets, gts, thr, kind, cap, options.threads);
    for (std::size_t t = 0; t < thr.size(); ++t) {
      result.per_threshold[t].recall = curve_for(capped, t, thr[t]).recall;
    }
  }
  return result;
}

std::optional<double> average_precision(std::span<const Detection> dets,
                                        std::span<const GroundTruth> gts, double threshold,
                                        IouKind kind, const EvalOptions& options) {
  return evaluate_task(dets, gts, IouThresholds::single(threshold), kind, options)
      .per_threshold[0]
      .ap;
}

std::optional<double> ap_range(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                               const IouThresholds& thresholds, IouKind kind,
                               const EvalOptions& options) {
  return evaluate_task(dets, gts, thresholds, kind, options).mean_ap();
}

std::optional<double> average_recall(std::span<const Detection> dets,
                                     std::span<const GroundTruth> gts,
                                     const IouThresholds& thresholds, IouKind kind,
                                     const EvalOptions& options) {
  return evaluate_task(dets, gts, thresholds, kind, options).mean_recall();
}

std::array<std::optional<double>, 8> summary_values(const EvalSummary& s) {
  return {s.ap50_bb, s.ap5095_bb, s.ap50_seg, s.ap5095_seg,
          s.ar50_bb, s.ar5095_bb, s.ar50_seg, s.ar5095_seg};
}

EvalSummary summary_from_values(const std::array<std::optional<double>, 8>& v) {
  EvalSummary s;
  s.ap50_bb = v[0];
  s.ap5095_bb = v[1];
  s.ap50_seg = v[2];
  s.ap5095_seg = v[3];
  s.ar50_bb = v[4];
  s.ar5095_bb = v[5];
  s.ar50_seg = v[6];
  s.ar5095_seg = v[7];
  return s;
}

namespace {

std::string list_ids(const std::vector<std::int64_t>& ids) {
  std::ostringstream os;
  os << "predictions reference " << ids.size() << " unknown image id(s):";
  for (auto id : ids) os << ' ' << id;
  return os.str();
}

std::optional<double> percent(std::optional<double> v) {
  if (!v) return std::nullopt;
  return *v * 100.0;
}

}  // namespace

UnknownImageError::UnknownImageError(std::vector<std::int64_t> ids)
    : FormatError(list_ids(ids)), ids_(std::move(ids)) {}

std::vector<GroundTruth> ground_truth_from(const DatasetIndex& index) {
  const auto tree_id = index.tree_category_id();
  std::vector<GroundTruth> out;
  for (const auto& a : index.annotations) {
    if (tree_id && a.category_id != *tree_id) continue;
    const ImageRecord* img = index.find_image(a.image_id);
    GroundTruth g{a.image_id, a.id, a.bbox, std::nullopt, a.iscrowd};
    if (img) {
      if (auto m = annotation_mask(a, *img)) g.mask = encode_rle(*m);
    }
    out.push_back(std::move(g));
  }
  return out;
}

EvalSummary evaluate(const DatasetIndex& index, std::span<const Detection> predictions,
                     const EvalOptions& options) {
  std::vector<std::int64_t> unknown;
  for (const auto& d : predictions) {
    if (!index.find_image(d.image_id)) unknown.push_back(d.image_id);
  }
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
    throw UnknownImageError(std::move(unknown));
  }
  const auto tree_id = index.tree_category_id().value_or(1);
  std::vector<Detection> dets;
  for (const auto& d : predictions) {
    if (d.category_id == tree_id) dets.push_back(d);
  }
  const std::vector<GroundTruth> gts = ground_truth_from(index);
  const auto thresholds = IouThresholds::canonical();

  EvalSummary s;
  s.num_images = index.images.size();
  s.num_dets = dets.size();
  for (const auto& g : gts) s.num_gt += g.iscrowd ? 0 : 1;

  const TaskResult bb = evaluate_task(dets, gts, thresholds, IouKind::kBox, options);
  s.ap50_bb = percent(bb.per_threshold[0].ap);
  s.ap5095_bb = percent(bb.mean_ap());
  s.ar50_bb = percent(bb.per_threshold[0].recall);
  s.ar5095_bb = percent(bb.mean_recall());
  for (const auto& r : bb.per_threshold) s.pr_curves_bb.push_back(r.curve);

  const bool pred_masks = std::any_of(dets.begin(), dets.end(), [](const Detection& d) { return d.mask.has_value(); });
  const bool gt_masks = std::any_of(gts.begin(), gts.end(), [](const GroundTruth& g) { return g.mask.has_value(); });
  if (pred_masks && gt_masks) {
    const TaskResult seg = evaluate_task(dets, gts, thresholds, IouKind::kMask, options);
    s.ap50_seg = percent(seg.per_threshold[0].ap);
    s.ap5095_seg = percent(seg.mean_ap());
    s.ar50_seg = percent(seg.per_threshold[0].recall);
    s.ar5095_seg = percent(seg.mean_recall());
    for (const auto& r : seg.per_threshold) s.pr_curves_seg.push_back(r.curve);
  }
  return s;
}

namespace {

json curve_json(const PRCurve& c) {
  json recall = json::array(), precision = json::array(), score = json::array();
  for (const auto& p : c.points) {
    recall.push_back(p.recall);
    precision.push_back(p.precision);
    score.push_back(p.score);
  }
  return {{"iou_threshold", c.iou_threshold},
          {"recall", recall},
          {"precision", precision},
          {"score", score},
          {"interpolated_precision", c.interpolated}};
}

PRCurve curve_from_json(const json& j) {
  PRCurve c;
  c.iou_threshold = j.at("iou_threshold").get<double>();
  const auto& r = j.at("recall");
  const auto& p = j.at("precision");
  const auto& s = j.at("score");
  for (std::size_t i = 0; i < r.size(); ++i) {
    c.points.push_back({r[i].get<double>(), p[i].get<double>(), s[i].get<double>()});
  }
  const auto& interp = j.at("interpolated_precision");
  for (int i = 0; i < kRecallSamples && i < static_cast<int>(interp.size()); ++i) {
    c.interpolated[i] = interp[i].get<double>();
  }
  return c;
}

}  // namespace

json to_json(const EvalSummary& s) {
  json metrics = json::object();
  const auto values = summary_values(s);
  for (std::size_t i = 0; i < values.size(); ++i) {
    metrics[kSummaryColumns[i]] = values[i] ? json(*values[i]) : json(nullptr);
  }
  json bb = json::array(), seg = json::array();
  for (const auto& c : s.pr_curves_bb) bb.push_back(curve_json(c));
  for (const auto& c : s.pr_curves_seg) seg.push_back(curve_json(c));
  return {{"metrics", metrics},
          {"num_images", s.num_images},
          {"num_gt", s.num_gt},
          {"num_dets", s.num_dets},
          {"pr_curves", {{"bbox", bb}, {"segm", seg}}}};
}

EvalSummary summary_from_json(const json& j) {
  const json& m = j.contains("metrics") ? j.at("metrics") : j;
  std::array<std::optional<double>, 8> v;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (m.contains(kSummaryColumns[i]) && m[kSummaryColumns[i]].is_number()) {
      v[i] = m[kSummaryColumns[i]].get<double>();
    }
  }
  EvalSummary s = summary_from_values(v);
  s.num_images = j.value("num_images", std::size_t{0});
  s.num_gt = j.value("num_gt", std::size_t{0});
  s.num_dets = j.value("num_dets", std::size_t{0});
  if (j.contains("pr_curves")) {
    for (const auto& c : j["pr_curves"].value("bbox", json::array())) s.pr_curves_bb.push_back(curve_from_json(c));
    for (const auto& c : j["pr_curves"].value("segm", json::array())) s.pr_curves_seg.push_back(curve_from_json(c));
  }
  return s;
}

std::string format_summary_table(const EvalSummary& summary, const std::string& label) {
  static constexpr std::array<const char*, 8> headers = {
      "AP^bb_50", "AP^bb_50:95", "AP^seg_50", "AP^seg_50:95",
      "AR^bb_50", "AR^bb_50:95", "AR^seg_50", "AR^seg_50:95"};
  std::string head = "Model", row = label;
  const auto values = summary_values(summary);
  for (std::size_t i = 0; i < headers.size(); ++i) {
    head += std::string(" | ") + headers[i];
    char buf[32];
    if (values[i]) {
      std::snprintf(buf, sizeof buf, "%.1f", *values[i]);
    } else {
      std::snprintf(buf, sizeof buf, "-");
    }
    row += std::string(" | ") + buf;
  }
  return head + "\n" + row + "\n";
}

std::vector<Detection> parse_detections(const json& doc, const DatasetIndex& index) {
  std::vector<ParseOffense> offenses;
  std::vector<std::int64_t> unknown;
  std::vector<Detection> out;
  if (!doc.is_array()) {
    throw DatasetParseError({{"document", std::nullopt, 0, "predictions must be a JSON array"}});
  }
  const std::int64_t default_category = index.tree_category_id().value_or(1);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    std::vector<std::string> reasons;
    Detection d;
    d.category_id = default_category;
    const ImageRecord* img = nullptr;
    if (!rec.is_object()) {
      offenses.push_back({"detection", std::nullopt, i, "record is not an object"});
      continue;
    }
    if (!rec.contains("image_id") || !(rec["image_id"].is_number_integer() || rec["image_id"].is_number_unsigned())) {
      reasons.push_back("missing or non-integer \"image_id\"");
    } else {
      d.image_id = rec["image_id"].get<std::int64_t>();
      img = index.find_image(d.image_id);
      if (!img) unknown.push_back(d.image_id);
    }
    if (rec.contains("category_id")) {
      if (rec["category_id"].is_number_integer() || rec["category_id"].is_number_unsigned()) {
        d.category_id = rec["category_id"].get<std::int64_t>();
      } else {
        reasons.push_back("\"category_id\" must be an integer");
      }
    }
    const json* b = rec.contains("bbox") ? &rec["bbox"] : nullptr;
    if (!b || !b->is_array() || b->size() != 4 ||
        !std::all_of(b->begin(), b->end(), [](const json& v) { return v.is_number(); })) {
      reasons.push_back("bbox must be [x, y, w, h]");
    } else {
      d.bbox = {(*b)[0].get<double>(), (*b)[1].get<double>(), (*b)[2].get<double>(),
                (*b)[3].get<double>()};
      if (!(d.bbox.w > 0 && d.bbox.h > 0)) reasons.push_back("bbox w, h must be > 0");
    }
    if (!rec.contains("score") || !rec["score"].is_number()) {
      reasons.push_back("missing or non-numeric \"score\"");
    } else {
      d.score = rec["score"].get<double>();
      if (!(d.score >= 0.0 && d.score <= 1.0)) reasons.push_back("score must lie in [0, 1]");
    }
    if (rec.contains("segmentation") && !rec["segmentation"].is_null() && img) {
      std::string err;
      auto seg = segmentation_from_json(rec["segmentation"], img->height, img->width, err);
      if (!seg) {
        reasons.push_back("segmentation: " + err);
      } else {
        d.mask = encode_rle(*segmentation_mask(*seg, img->width, img->height));
      }
    }
    if (rec.contains("keypoints") && !rec["keypoints"].is_null()) {
      const json& k = rec["keypoints"];
      const bool numeric = k.is_array() && std::all_of(k.begin(), k.end(), [](const json& v) { return v.is_number(); });
      if (!numeric || (k.size() != 15 && k.size() != 10)) {
        reasons.push_back("keypoint arity: expected 15 or 10 numbers");
      } else {
        const int stride = k.size() == 15 ? 3 : 2;
        KeypointSet kps;
        for (int j = 0; j < kNumKeypoints; ++j) {
          kps[j].u = k[stride * j].get<double>();
          kps[j].v = k[stride * j + 1].get<double>();
          int flag = stride == 3 ? static_cast<int>(k[stride * j + 2].get<double>()) : 2;
          if (flag < 0 || flag > 2) {
            reasons.push_back("keypoint flag must be 0, 1 or 2");
            flag = 0;
          }
          kps[j].flag = static_cast<KeypointFlag>(flag);
        }
        d.keypoints = kps;
      }
    }
    if (!reasons.empty()) {
      std::string reason;
      for (std::size_t r = 0; r < reasons.size(); ++r) reason += (r ? "; " : "") + reasons[r];
      offenses.push_back({"detection", std::nullopt, i, reason});
      continue;
    }
    out.push_back(std::move(d));
  }
  if (!offenses.empty()) throw DatasetParseError(std::move(offenses));
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
    throw UnknownImageError(std::move(unknown));
  }
  return out;
}

std::vector<Detection> read_detections(const std::filesystem::path& path,
                                       const DatasetIndex& index) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DatasetParseError({{"document", std::nullopt, 0, path.string() + ": " + e.what()}});
  }
  return parse_detections(doc, index);
}

json detections_to_json(std::span<const Detection> dets) {
  json arr = json::array();
  for (const auto& d : dets) {
    json j{{"image_id", d.image_id},
           {"category_id", d.category_id},
           {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
           {"score", d.score}};
    if (d.mask) to_json(j["segmentation"], Segmentation{*d.mask});
    if (d.keypoints) {
      json k = json::array();
      for (const auto& kp : *d.keypoints) {
        k.push_back(kp.u);
        k.push_back(kp.v);
        k.push_back(static_cast<int>(kp.flag));
      }
      j["keypoints"] = std::move(k);
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

std::string dump_detections(std::span<const Detection> dets) {
  const json arr = detections_to_json(dets);
  if (arr.empty()) return "[]\n";
  std::string out = "[";
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out += i ? ",\n" : "\n";
    out += arr[i].dump();
  }
  return out + "\n]\n";
}

}  // namespace timberlens
