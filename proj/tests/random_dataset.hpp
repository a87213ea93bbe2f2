#pragma once

#include <random>

#include "timberlens/dataset.hpp"

namespace testutil {

// A valid dataset whose values survive a JSON round trip: every box is
// inside its image and every numeric field is exactly representable.
inline timberlens::DatasetIndex random_dataset(std::mt19937_64& rng, int images = 6) {
  using namespace timberlens;
  std::uniform_int_distribution<int> dim(20, 80), n_ann(0, 5), flag(0, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DatasetIndex idx;
  idx.categories = {tree_category()};
  std::int64_t ann_id = 100;
  for (int i = 0; i < images; ++i) {
    ImageRecord img;
    img.id = 1 + 3 * i;
    img.width = dim(rng);
    img.height = dim(rng);
    img.file_name = "rgb/img_" + std::to_string(i) + ".png";
    if (unit(rng) < 0.5) {
      img.depth_file_name = "depth/img_" + std::to_string(i) + ".png";
      img.intrinsics = CameraIntrinsics::for_resolution(img.width, img.height);
    }
    idx.images.push_back(img);
    const int n = n_ann(rng);
    for (int k = 0; k < n; ++k) {
      AnnotationRecord a;
      a.id = ann_id++;
      a.image_id = img.id;
      const int x = std::uniform_int_distribution<int>(0, img.width - 4)(rng);
      const int y = std::uniform_int_distribution<int>(0, img.height - 4)(rng);
      const int w = std::uniform_int_distribution<int>(2, img.width - x)(rng);
      const int h = std::uniform_int_distribution<int>(2, img.height - y)(rng);
      a.bbox = {double(x), double(y), double(w), double(h)};
      const double r = unit(rng);
      if (r < 0.4) {
        Mask m(img.width, img.height);
        for (int yy = y; yy < y + h; ++yy)
          for (int xx = x; xx < x + w; ++xx) m.at(xx, yy) = unit(rng) < 0.7;
        a.segmentation = encode_rle(m);
        a.area = double(m.area());
      } else if (r < 0.8) {
        a.segmentation = Polygons{{double(x), double(y), double(x + w), double(y), double(x + w),
                                   double(y + h), double(x), double(y + h)}};
        a.area = double(w) * h;
      } else {
        a.area = double(w) * h;
      }
      if (unit(rng) < 0.7) {
        KeypointSet kps;
        int visible = 0;
        for (auto& kp : kps) {
          kp.flag = static_cast<KeypointFlag>(flag(rng));
          if (kp.flag != KeypointFlag::kAbsent) {
            kp.u = x + 0.25 * std::uniform_int_distribution<int>(0, 4 * w)(rng);
            kp.v = y + 0.25 * std::uniform_int_distribution<int>(0, 4 * h)(rng);
            ++visible;
          }
        }
        a.keypoints = kps;
        a.num_keypoints = visible;
        a.occlusion_tree = std::uniform_int_distribution<int>(0, 64)(rng) / 64.0;
        if (unit(rng) < 0.5) a.occlusion_base = std::uniform_int_distribution<int>(0, 64)(rng) / 64.0;
        a.distance_m = std::uniform_int_distribution<int>(1, 80)(rng) / 8.0;
      }
      idx.annotations.push_back(std::move(a));
    }
  }
  return idx;
}

}  // namespace testutil
