#include "timberlens/kp_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace timberlens {

using nlohmann::json;

Keypoint3D backproject(double u, double v, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw MissingDepthError("no depth at pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                            ")");
  }
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

PixelPoint project(const Keypoint3D& p, const CameraIntrinsics& k) {
  return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
}

namespace {

bool usable(const DepthContext& ctx, double z) {
  if (!(z > 0.0) || !std::isfinite(z)) return false;
  return !ctx.instance_distance || z <= *ctx.instance_distance + kBackgroundMargin;
}

}  // namespace

std::optional<double> sample_depth(double u, double v, const DepthContext& ctx) {
  if (!ctx.depth) return std::nullopt;
  const DepthImage& d = *ctx.depth;
  const int px = static_cast<int>(std::lround(u));
  const int py = static_cast<int>(std::lround(v));
  if (d.contains(px, py) && usable(ctx, d.at(px, py))) return d.at(px, py);
  if (!ctx.instance_mask) return std::nullopt;

  const Mask& m = *ctx.instance_mask;
  std::vector<double> samples;
  for (int y = py - kFallbackRadius; y <= py + kFallbackRadius; ++y) {
    for (int x = px - kFallbackRadius; x <= px + kFallbackRadius; ++x) {
      if ((x - px) * (x - px) + (y - py) * (y - py) > kFallbackRadius * kFallbackRadius) continue;
      if (!d.contains(x, y) || x >= m.width || y >= m.height || !m.at(x, y)) continue;
      if (usable(ctx, d.at(x, y))) samples.push_back(d.at(x, y));
    }
  }
  if (samples.empty()) return std::nullopt;
  return median(std::move(samples));
}

std::vector<InstancePair> match_instances(std::span<const Detection> preds,
                                          std::span<const GroundTruth> gts,
                                          double iou_threshold) {
  std::map<std::int64_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_image;
  for (std::size_t i = 0; i < preds.size(); ++i) by_image[preds[i].image_id].first.push_back(i);
  for (std::size_t i = 0; i < gts.size(); ++i) by_image[gts[i].image_id].second.push_back(i);

  std::vector<InstancePair> pairs;
  for (const auto& [id, group] : by_image) {
    const auto& [pi, gi] = group;
    if (pi.empty() || gi.empty()) continue;
    std::vector<Detection> p;
    std::vector<GroundTruth> g;
    for (auto i : pi) p.push_back(preds[i]);
    for (auto i : gi) g.push_back(gts[i]);
    const MatchResult m = match_greedy(p, g, iou_threshold, IouKind::kBox);
    std::vector<std::size_t> order(pi.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a].score > p[b].score; });
    for (std::size_t d : order) {
      const int gt = m.det_gt[0][d];
      if (m.det_state[0][d] != MatchState::kTruePositive) continue;
      pairs.push_back({pi[d], gi[static_cast<std::size_t>(gt)], iou_box(p[d].bbox, g[gt].bbox)});
    }
  }
  return pairs;
}

std::optional<FellingCutError> felling_cut_error(const Keypoint2D& pred, const Keypoint2D& gt,
                                                 const DepthContext& ctx,
                                                 const CameraIntrinsics& k) {
  const auto zp = sample_depth(pred.u, pred.v, ctx);
  const auto zg = sample_depth(gt.u, gt.v, ctx);
  if (!zp || !zg) return std::nullopt;
  const Keypoint3D p = backproject(pred.u, pred.v, *zp, k);
  const Keypoint3D g = backproject(gt.u, gt.v, *zg, k);
  FellingCutError e;
  e.dx_cm = (p.x - g.x) * 100.0;
  e.dy_cm = (p.y - g.y) * 100.0;
  e.dz_cm = (p.z - g.z) * 100.0;
  e.error_cm = std::sqrt(e.dx_cm * e.dx_cm + e.dy_cm * e.dy_cm + e.dz_cm * e.dz_cm);
  return e;
}

std::optional<double> diameter_from_keypoints(const Keypoint2D& left, const Keypoint2D& right,
                                              const DepthContext& ctx,
                                              const CameraIntrinsics& k) {
  const auto z = sample_depth(0.5 * (left.u + right.u), 0.5 * (left.v + right.v), ctx);
  if (!z) return std::nullopt;
  return std::abs(right.u - left.u) * *z / k.fx;
}

std::optional<Inclination> inclination_angle(const Keypoint2D& low, const Keypoint2D& high,
                                             const DepthContext& ctx, const CameraIntrinsics& k) {
  const double du = high.u - low.u, dv = high.v - low.v;
  if (du == 0.0 && dv == 0.0) throw ValidationError("inclination keypoints coincide");
  const auto zl = sample_depth(low.u, low.v, ctx);
  const auto zh = sample_depth(high.u, high.v, ctx);
  if (!zl || !zh) return std::nullopt;
  const Vec3 seg = backproject(high.u, high.v, *zh, k).vec() - backproject(low.u, low.v, *zl, k).vec();
  const double len = norm(seg);
  if (!(len > 0.0)) throw ValidationError("inclination segment has zero length");
  Inclination inc;
  inc.degrees_3d = rad2deg(std::acos(std::clamp(-seg.y / len, -1.0, 1.0)));
  inc.degrees_image = rad2deg(std::acos(std::clamp(-dv / std::hypot(du, dv), -1.0, 1.0)));
  return inc;
}

namespace {

bool has(const Keypoint2D& kp) { return kp.flag != KeypointFlag::kAbsent; }

std::optional<ErrorAggregate> summarize(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return ErrorAggregate{v.size(), mean(v), median(v)};
}

}  // namespace

void aggregate(KeypointErrorReport& report) {
  std::vector<double> fc, dx, dy, dia, inc, inc_img;
  for (const auto& r : report.instances) {
    if (r.fc) {
      fc.push_back(r.fc->error_cm);
      dx.push_back(r.fc->dx_cm);
      dy.push_back(r.fc->dy_cm);
    }
    if (r.dia_error_cm) dia.push_back(*r.dia_error_cm);
    if (r.inc_error_deg) inc.push_back(*r.inc_error_deg);
    if (r.inc_error_image_deg) inc_img.push_back(*r.inc_error_image_deg);
  }
  report.fc_error_cm = summarize(fc);
  report.fc_dx_cm = summarize(dx);
  report.fc_dy_cm = summarize(dy);
  report.dia_error_cm = summarize(dia);
  report.inc_error_deg = summarize(inc);
  report.inc_error_image_deg = summarize(inc_img);
}

KeypointErrorReport keypoint_errors(const DatasetIndex& index, std::span<const Detection> preds,
                                    const DepthLoader& load_depth,
                                    const KeypointEvalOptions& options) {
  const auto tree_id = index.tree_category_id();
  std::vector<const AnnotationRecord*> anns;
  for (const auto& a : index.annotations) {
    if (!tree_id || a.category_id == *tree_id) anns.push_back(&a);
  }
  const std::vector<GroundTruth> gts = ground_truth_from(index);
  std::vector<Detection> tree_preds;
  std::vector<std::size_t> pred_origin;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].category_id == tree_id.value_or(1)) {
      tree_preds.push_back(preds[i]);
      pred_origin.push_back(i);
    }
  }
  const auto pairs = match_instances(tree_preds, gts, options.iou_threshold);

  KeypointErrorReport report;
  report.matched = pairs.size();
  report.unmatched_predictions = preds.size() - pairs.size();
  std::size_t gt_count = 0;
  for (const auto& g : gts) gt_count += g.iscrowd ? 0 : 1;
  report.unmatched_gt = gt_count - pairs.size();

  std::int64_t loaded_for = 0;
  bool loaded = false;
  std::optional<DepthImage> depth;
  for (const auto& pair : pairs) {
    const Detection& pred = tree_preds[pair.pred];
    const AnnotationRecord& ann = *anns[pair.gt];
    const ImageRecord* image = index.find_image(ann.image_id);
    InstanceKeypointError r;
    r.image_id = ann.image_id;
    r.gt_id = ann.id;
    r.pred_index = pred_origin[pair.pred];
    r.distance_m = ann.distance_m;

    if (!loaded || loaded_for != ann.image_id) {
      depth = image ? load_depth(*image) : std::nullopt;
      loaded_for = ann.image_id;
      loaded = true;
    }
    if (!pred.keypoints || !ann.keypoints || !depth) {
      ++report.excluded_fc;
      ++report.excluded_dia;
      ++report.excluded_inc;
      report.instances.push_back(r);
      continue;
    }
    std::optional<Mask> mask;
    if (gts[pair.gt].mask) mask = decode_rle(*gts[pair.gt].mask, image->width, image->height);
    const DepthContext ctx{&*depth, mask ? &*mask : nullptr, ann.distance_m};
    const CameraIntrinsics k = image->intrinsics.value_or(options.default_intrinsics);
    const KeypointSet& pk = *pred.keypoints;
    const KeypointSet& gk = *ann.keypoints;

    if (has(pk[kFellingCut]) && has(gk[kFellingCut])) {
      r.fc = felling_cut_error(pk[kFellingCut], gk[kFellingCut], ctx, k);
      if (!r.distance_m) {
        if (auto z = sample_depth(gk[kFellingCut].u, gk[kFellingCut].v, ctx)) {
          r.distance_m = norm(backproject(gk[kFellingCut].u, gk[kFellingCut].v, *z, k).vec());
        }
      }
    }
    if (!r.fc) ++report.excluded_fc;

    if (has(pk[kDiameterLeft]) && has(pk[kDiameterRight]) && has(gk[kDiameterLeft]) &&
        has(gk[kDiameterRight])) {
      const auto dp = diameter_from_keypoints(pk[kDiameterLeft], pk[kDiameterRight], ctx, k);
      const auto dg = diameter_from_keypoints(gk[kDiameterLeft], gk[kDiameterRight], ctx, k);
      if (dp && dg) {
        r.dia_pred_cm = *dp * 100.0;
        r.dia_gt_cm = *dg * 100.0;
        r.dia_error_cm = std::abs(*dp - *dg) * 100.0;
      }
    }
    if (!r.dia_error_cm) ++report.excluded_dia;

    if (has(pk[kInclinationMid]) && has(pk[kInclinationTop]) && has(gk[kInclinationMid]) &&
        has(gk[kInclinationTop])) {
      try {
        const auto ip = inclination_angle(pk[kInclinationMid], pk[kInclinationTop], ctx, k);
        const auto ig = inclination_angle(gk[kInclinationMid], gk[kInclinationTop], ctx, k);
        if (ip && ig) {
          r.inc_error_deg = std::abs(ip->degrees_3d - ig->degrees_3d);
          r.inc_error_image_deg = std::abs(ip->degrees_image - ig->degrees_image);
        }
      } catch (const ValidationError&) {
      }
    }
    if (!r.inc_error_deg) ++report.excluded_inc;
    report.instances.push_back(r);
  }
  aggregate(report);
  return report;
}

ErrorVsDistance error_vs_distance(std::span<const std::pair<double, double>> samples,
                                  double max_distance, double bin_width) {
  ErrorVsDistance out;
  const int nbins = std::max(1, static_cast<int>(std::ceil(max_distance / bin_width)));
  std::vector<double> sums(nbins, 0.0);
  out.bins.resize(nbins);
  for (int b = 0; b < nbins; ++b) {
    out.bins[b].lo = b * bin_width;
    out.bins[b].hi = std::min(max_distance, (b + 1) * bin_width);
  }
  std::vector<double> xs, ys;
  for (const auto& [dist, err] : samples) {
    if (dist > max_distance) {
      ++out.excluded_beyond_range;
      continue;
    }
    out.points.emplace_back(dist, err);
    xs.push_back(dist);
    ys.push_back(err);
    const int b = std::clamp(static_cast<int>(dist / bin_width), 0, nbins - 1);
    ++out.bins[b].count;
    sums[b] += err;
  }
  for (int b = 0; b < nbins; ++b) {
    if (out.bins[b].count) out.bins[b].mean_error = sums[b] / double(out.bins[b].count);
  }
  out.fit = fit_line(xs, ys);
  return out;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json agg_json(const std::optional<ErrorAggregate>& a) {
  if (!a) return nullptr;
  return {{"count", a->count}, {"mean", a->mean}, {"median", a->median}};
}

}  // namespace

json to_json(const KeypointErrorReport& report) {
  json inst = json::array();
  for (const auto& r : report.instances) {
    json j{{"image_id", r.image_id},
           {"gt_id", r.gt_id},
           {"pred_index", r.pred_index},
           {"distance_m", opt(r.distance_m)},
           {"dia_pred_cm", opt(r.dia_pred_cm)},
           {"dia_gt_cm", opt(r.dia_gt_cm)},
           {"dia_error_cm", opt(r.dia_error_cm)},
           {"inc_error_deg", opt(r.inc_error_deg)},
           {"inc_error_image_deg", opt(r.inc_error_image_deg)}};
    if (r.fc) {
      j["fc_error_cm"] = r.fc->error_cm;
      j["fc_dx_cm"] = r.fc->dx_cm;
      j["fc_dy_cm"] = r.fc->dy_cm;
      j["fc_dz_cm"] = r.fc->dz_cm;
    } else {
      j["fc_error_cm"] = j["fc_dx_cm"] = j["fc_dy_cm"] = j["fc_dz_cm"] = nullptr;
    }
    inst.push_back(std::move(j));
  }
  return {{"instances", inst},
          {"counts",
           {{"matched", report.matched},
            {"unmatched_predictions", report.unmatched_predictions},
            {"unmatched_gt", report.unmatched_gt},
            {"excluded_fc", report.excluded_fc},
            {"excluded_dia", report.excluded_dia},
            {"excluded_inc", report.excluded_inc}}},
          {"aggregates",
           {{"fc_error_cm", agg_json(report.fc_error_cm)},
            {"fc_dx_cm", agg_json(report.fc_dx_cm)},
            {"fc_dy_cm", agg_json(report.fc_dy_cm)},
            {"dia_error_cm", agg_json(report.dia_error_cm)},
            {"inc_error_deg", agg_json(report.inc_error_deg)},
            {"inc_error_image_deg", agg_json(report.inc_error_image_deg)}}}};
}

json to_json(const ErrorVsDistance& s) {
  json pts = json::array(), bins = json::array();
  for (const auto& [d, e] : s.points) pts.push_back({d, e});
  for (const auto& b : s.bins) {
    bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count},
                    {"mean_error", b.count ? json(b.mean_error) : json(nullptr)}});
  }
  json fit = nullptr;
  if (s.fit) {
    fit = {{"slope", s.fit->slope},
           {"intercept", s.fit->intercept},
           {"slope_se", s.fit->slope_se},
           {"intercept_se", s.fit->intercept_se},
           {"slope_ci95", {s.fit->slope_ci_low(), s.fit->slope_ci_high()}},
           {"residual_sd", s.fit->residual_sd},
           {"n", s.fit->n}};
  }
  return {{"points", pts},
          {"bins", bins},
          {"fit", fit},
          {"excluded_beyond_range", s.excluded_beyond_range}};
}

std::string format_fc_medians(const KeypointErrorReport& report) {
  if (!report.fc_dx_cm || !report.fc_dy_cm) return "felling cut: no resolvable instances";
  char buf[160];
  std::snprintf(buf, sizeof buf, "felling cut: median x = %+.2f cm, median y = %+.2f cm (n = %zu)",
                report.fc_dx_cm->median, report.fc_dy_cm->median, report.fc_dy_cm->count);
  return buf;
}

}  // namespace timberlens
