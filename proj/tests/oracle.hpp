#pragma once

// Brute-force reference evaluator used by the tests. It shares no code with
// the library: IoU, matching, PR construction and interpolation are all
// written out directly from the definitions.

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

namespace oracle {

struct Box {
  double x0, y0, x1, y1;
};

struct Det {
  std::int64_t image;
  Box box;
  double score;
};

struct Gt {
  std::int64_t image;
  std::int64_t id;
  Box box;
};

inline double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  const double u = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
  return u > 0 ? inter / u : 0.0;
}

struct Result {
  double ap = 0.0;
  double recall = 0.0;
};

inline Result evaluate(const std::vector<Det>& dets, const std::vector<Gt>& gts, double thr) {
  // True-positive flag per detection, image by image.
  std::vector<int> is_tp(dets.size(), 0);
  std::map<std::int64_t, int> seen;
  for (const auto& d : dets) seen[d.image] = 1;
  for (const auto& [img, unused] : seen) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < dets.size(); ++i)
      if (dets[i].image == img) order.push_back(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    std::vector<std::size_t> cand;
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (gts[g].image == img) cand.push_back(g);
    std::vector<int> taken(cand.size(), 0);
    for (std::size_t d : order) {
      int best = -1;
      for (std::size_t c = 0; c < cand.size(); ++c) {
        if (taken[c]) continue;
        const double v = iou(dets[d].box, gts[cand[c]].box);
        if (v < thr) continue;
        if (best < 0) {
          best = int(c);
          continue;
        }
        const double bv = iou(dets[d].box, gts[cand[best]].box);
        if (v > bv || (v == bv && gts[cand[c]].id < gts[cand[best]].id)) best = int(c);
      }
      if (best >= 0) {
        taken[best] = 1;
        is_tp[d] = 1;
      }
    }
  }

  std::vector<std::size_t> all(dets.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].image != dets[b].image) return dets[a].image < dets[b].image;
    return a < b;
  });
  const std::size_t npos = gts.size();
  std::vector<std::size_t> tp_at;
  std::vector<double> prec;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < all.size(); ++k) {
    tp += is_tp[all[k]];
    tp_at.push_back(tp);
    prec.push_back(double(tp) / double(k + 1));
  }
  Result r;
  if (npos == 0) return r;
  double sum = 0.0;
  for (int s = 0; s <= 100; ++s) {
    double best = 0.0;
    for (std::size_t k = 0; k < prec.size(); ++k) {
      if (tp_at[k] * 100 >= std::size_t(s) * npos) best = std::max(best, prec[k]);
    }
    sum += best;
  }
  r.ap = sum / 101.0;
  r.recall = double(tp) / double(npos);
  return r;
}

}  // namespace oracle
