#pragma once

#include <random>
#include <vector>

#include "oracle.hpp"
#include "timberlens/eval.hpp"

namespace testutil {

// Random detection/GT sets with near-duplicates so that every IoU band and
// plenty of score ties occur.
struct Instance {
  std::vector<timberlens::Detection> dets;
  std::vector<timberlens::GroundTruth> gts;
  std::vector<oracle::Det> odets;
  std::vector<oracle::Gt> ogts;
};

inline Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_img(1, 10), n_obj(0, 8), coord(0, 60), side(2, 30), jit(-4, 4);
  std::uniform_int_distribution<int> score_q(0, 10);
  std::bernoulli_distribution near(0.7);
  Instance in;
  std::int64_t next_id = 1;
  const int images = n_img(rng);
  for (int im = 0; im < images; ++im) {
    std::vector<timberlens::BBox> boxes;
    const int ng = n_obj(rng);
    for (int g = 0; g < ng; ++g) {
      timberlens::BBox b{double(coord(rng)), double(coord(rng)), double(side(rng)), double(side(rng))};
      boxes.push_back(b);
      in.gts.push_back({im, next_id, b, std::nullopt, false});
      in.ogts.push_back({im, next_id, {b.x, b.y, b.x2(), b.y2()}});
      ++next_id;
    }
    const int nd = n_obj(rng);
    for (int d = 0; d < nd; ++d) {
      timberlens::BBox b;
      if (!boxes.empty() && near(rng)) {
        const auto& s = boxes[std::uniform_int_distribution<std::size_t>(0, boxes.size() - 1)(rng)];
        b = {s.x + jit(rng), s.y + jit(rng), std::max(1.0, s.w + jit(rng)), std::max(1.0, s.h + jit(rng))};
      } else {
        b = {double(coord(rng)), double(coord(rng)), double(side(rng)), double(side(rng))};
      }
      const double score = score_q(rng) / 10.0;
      timberlens::Detection det;
      det.image_id = im;
      det.bbox = b;
      det.score = score;
      in.dets.push_back(det);
      in.odets.push_back({im, {b.x, b.y, b.x2(), b.y2()}, score});
    }
  }
  return in;
}

}  // namespace testutil
