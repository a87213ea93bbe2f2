#include "timberlens/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace timberlens {

using nlohmann::json;

CategoryDef tree_category() {
  CategoryDef cat;
  cat.id = 1;
  cat.name = "tree";
  cat.keypoint_names.assign(kKeypointNames.begin(), kKeypointNames.end());
  // 1-based, COCO style: felling cut to both diameter points and up the stem.
  cat.skeleton = {{1, 2}, {1, 3}, {1, 4}, {4, 5}};
  return cat;
}

const ImageRecord* DatasetIndex::find_image(std::int64_t id) const {
  for (const auto& img : images) {
    if (img.id == id) return &img;
  }
  return nullptr;
}

std::optional<std::int64_t> DatasetIndex::tree_category_id() const {
  for (const auto& c : categories) {
    if (c.name == "tree") return c.id;
  }
  return std::nullopt;
}

namespace {

std::string describe(const std::vector<ParseOffense>& offenses) {
  std::ostringstream os;
  os << offenses.size() << " malformed record(s):";
  for (const auto& o : offenses) {
    os << "\n  " << o.kind << " #" << o.position;
    if (o.id) os << " (id " << *o.id << ")";
    os << ": " << o.reason;
  }
  return os.str();
}

bool is_integer(const json& j) { return j.is_number_integer() || j.is_number_unsigned(); }

std::optional<std::int64_t> peek_id(const json& rec) {
  if (rec.is_object() && rec.contains("id") && is_integer(rec["id"])) {
    return rec["id"].get<std::int64_t>();
  }
  return std::nullopt;
}

// Collects reasons for one record; the record is accepted only if empty.
struct RecordCheck {
  std::vector<std::string> reasons;

  bool require(const json& rec, const char* key) {
    if (!rec.contains(key)) {
      reasons.push_back(std::string("missing key \"") + key + "\"");
      return false;
    }
    return true;
  }
  std::optional<std::int64_t> integer(const json& rec, const char* key, bool required = true) {
    if (!rec.contains(key)) {
      if (required) reasons.push_back(std::string("missing key \"") + key + "\"");
      return std::nullopt;
    }
    if (!is_integer(rec[key])) {
      reasons.push_back(std::string("\"") + key + "\" must be an integer");
      return std::nullopt;
    }
    return rec[key].get<std::int64_t>();
  }
  std::optional<double> number(const json& rec, const char* key) {
    if (!rec.contains(key) || rec[key].is_null()) return std::nullopt;
    if (!rec[key].is_number()) {
      reasons.push_back(std::string("\"") + key + "\" must be a number");
      return std::nullopt;
    }
    return rec[key].get<double>();
  }
};

std::optional<CameraIntrinsics> intrinsics_from_json(const json& j, RecordCheck& check) {
  if (!j.is_object()) {
    check.reasons.push_back("\"intrinsics\" must be an object");
    return std::nullopt;
  }
  CameraIntrinsics k;
  const std::array<std::pair<const char*, double*>, 4> fields = {
      {{"fx", &k.fx}, {"fy", &k.fy}, {"cx", &k.cx}, {"cy", &k.cy}}};
  for (auto [key, dst] : fields) {
    if (!j.contains(key) || !j[key].is_number()) {
      check.reasons.push_back(std::string("intrinsics.") + key + " missing or not a number");
      return std::nullopt;
    }
    *dst = j[key].get<double>();
  }
  if (k.fx <= 0 || k.fy <= 0) {
    check.reasons.push_back("intrinsics focal lengths must be positive");
    return std::nullopt;
  }
  return k;
}

std::optional<ImageRecord> parse_image(const json& rec, RecordCheck& check) {
  if (!rec.is_object()) {
    check.reasons.push_back("record is not an object");
    return std::nullopt;
  }
  ImageRecord img;
  auto id = check.integer(rec, "id");
  auto w = check.integer(rec, "width");
  auto h = check.integer(rec, "height");
  if (check.require(rec, "file_name")) {
    if (rec["file_name"].is_string()) {
      img.file_name = rec["file_name"].get<std::string>();
    } else {
      check.reasons.push_back("\"file_name\" must be a string");
    }
  }
  if (rec.contains("depth_file_name") && !rec["depth_file_name"].is_null()) {
    if (rec["depth_file_name"].is_string()) {
      img.depth_file_name = rec["depth_file_name"].get<std::string>();
    } else {
      check.reasons.push_back("\"depth_file_name\" must be a string");
    }
  }
  if (rec.contains("intrinsics") && !rec["intrinsics"].is_null()) {
    img.intrinsics = intrinsics_from_json(rec["intrinsics"], check);
  }
  if (w && *w <= 0) check.reasons.push_back("width must be positive");
  if (h && *h <= 0) check.reasons.push_back("height must be positive");
  if (!check.reasons.empty()) return std::nullopt;
  img.id = *id;
  img.width = static_cast<int>(*w);
  img.height = static_cast<int>(*h);
  return img;
}

std::optional<CategoryDef> parse_category(const json& rec, RecordCheck& check) {
  if (!rec.is_object()) {
    check.reasons.push_back("record is not an object");
    return std::nullopt;
  }
  CategoryDef cat;
  cat.keypoint_names.clear();
  cat.skeleton.clear();
  auto id = check.integer(rec, "id");
  if (check.require(rec, "name")) {
    if (rec["name"].is_string()) {
      cat.name = rec["name"].get<std::string>();
    } else {
      check.reasons.push_back("\"name\" must be a string");
    }
  }
  if (rec.contains("keypoints")) {
    if (!rec["keypoints"].is_array()) {
      check.reasons.push_back("\"keypoints\" must be an array of names");
    } else {
      for (const auto& n : rec["keypoints"]) {
        if (!n.is_string()) {
          check.reasons.push_back("keypoint names must be strings");
          break;
        }
        cat.keypoint_names.push_back(n.get<std::string>());
      }
    }
  }
  if (rec.contains("skeleton")) {
    const auto& sk = rec["skeleton"];
    bool ok = sk.is_array();
    if (ok) {
      for (const auto& e : sk) {
        if (!e.is_array() || e.size() != 2 || !is_integer(e[0]) || !is_integer(e[1])) {
          ok = false;
          break;
        }
        cat.skeleton.push_back({e[0].get<int>(), e[1].get<int>()});
      }
    }
    if (!ok) check.reasons.push_back("\"skeleton\" must be a list of index pairs");
  }
  if (cat.name == "tree" && cat.keypoint_names.size() != kNumKeypoints) {
    check.reasons.push_back("category \"tree\" must declare exactly 5 keypoint names");
  }
  if (!check.reasons.empty()) return std::nullopt;
  cat.id = *id;
  return cat;
}

}  // namespace

std::optional<Segmentation> segmentation_from_json(const json& j, int height, int width,
                                                   std::string& error) {
  if (j.is_array()) {
    Polygons polys;
    for (const auto& p : j) {
      if (!p.is_array() || p.size() < 6 || p.size() % 2 != 0) {
        error = "polygon must be a flat list of at least 3 x,y pairs";
        return std::nullopt;
      }
      std::vector<double> flat;
      flat.reserve(p.size());
      for (const auto& v : p) {
        if (!v.is_number()) {
          error = "polygon coordinates must be numbers";
          return std::nullopt;
        }
        flat.push_back(v.get<double>());
      }
      polys.push_back(std::move(flat));
    }
    return Segmentation{std::move(polys)};
  }
  if (j.is_object()) {
    if (!j.contains("size") || !j["size"].is_array() || j["size"].size() != 2 ||
        !is_integer(j["size"][0]) || !is_integer(j["size"][1])) {
      error = "RLE needs \"size\": [height, width]";
      return std::nullopt;
    }
    const int h = j["size"][0].get<int>();
    const int w = j["size"][1].get<int>();
    if (height > 0 && (h != height || w != width)) {
      error = "RLE size does not match the image";
      return std::nullopt;
    }
    if (!j.contains("counts")) {
      error = "RLE needs \"counts\"";
      return std::nullopt;
    }
    Rle rle{h, w, {}};
    const auto& c = j["counts"];
    try {
      if (c.is_string()) {
        rle = rle_from_string(c.get<std::string>(), h, w);
      } else if (c.is_array()) {
        for (const auto& v : c) {
          if (!is_integer(v) || v.get<std::int64_t>() < 0) {
            error = "RLE counts must be non-negative integers";
            return std::nullopt;
          }
          rle.counts.push_back(v.get<std::uint32_t>());
        }
      } else {
        error = "RLE counts must be a list or a compressed string";
        return std::nullopt;
      }
    } catch (const FormatError& e) {
      error = e.what();
      return std::nullopt;
    }
    std::uint64_t total = 0;
    for (auto v : rle.counts) total += v;
    if (total != static_cast<std::uint64_t>(h) * w) {
      error = "RLE counts do not sum to height * width";
      return std::nullopt;
    }
    return Segmentation{std::move(rle)};
  }
  error = "segmentation must be polygons or an RLE object";
  return std::nullopt;
}

void to_json(json& j, const Segmentation& seg) {
  if (const auto* polys = std::get_if<Polygons>(&seg)) {
    j = *polys;
  } else {
    const auto& rle = std::get<Rle>(seg);
    j = json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
  }
}

namespace {

std::optional<AnnotationRecord> parse_annotation(const json& rec, const DatasetIndex& partial,
                                                 RecordCheck& check) {
  if (!rec.is_object()) {
    check.reasons.push_back("record is not an object");
    return std::nullopt;
  }
  AnnotationRecord ann;
  auto id = check.integer(rec, "id");
  auto image_id = check.integer(rec, "image_id");
  auto category_id = check.integer(rec, "category_id");
  const ImageRecord* image = nullptr;
  if (image_id) {
    image = partial.find_image(*image_id);
    if (!image) check.reasons.push_back("dangling image_id " + std::to_string(*image_id));
  }
  if (check.require(rec, "bbox")) {
    const auto& b = rec["bbox"];
    if (!b.is_array() || b.size() != 4 ||
        !std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number(); })) {
      check.reasons.push_back("bbox must be [x, y, w, h]");
    } else {
      ann.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      if (!(ann.bbox.w > 0 && ann.bbox.h > 0)) check.reasons.push_back("bbox w, h must be > 0");
    }
  }
  if (rec.contains("segmentation") && !rec["segmentation"].is_null()) {
    const auto& s = rec["segmentation"];
    const bool empty_list = s.is_array() && s.empty();
    if (!empty_list) {
      std::string err;
      ann.segmentation = segmentation_from_json(s, image ? image->height : 0,
                                                image ? image->width : 0, err);
      if (!ann.segmentation) check.reasons.push_back("segmentation: " + err);
    }
  }
  if (rec.contains("keypoints") && !rec["keypoints"].is_null()) {
    const auto& k = rec["keypoints"];
    if (!k.is_array() || k.size() != 3 * kNumKeypoints) {
      check.reasons.push_back("keypoint arity: expected 15 numbers, got " +
                              std::to_string(k.is_array() ? k.size() : 0));
    } else if (!std::all_of(k.begin(), k.end(), [](const json& v) { return v.is_number(); })) {
      check.reasons.push_back("keypoints must be numbers");
    } else {
      KeypointSet kps;
      for (int i = 0; i < kNumKeypoints; ++i) {
        const double f = k[3 * i + 2].get<double>();
        if (f != 0.0 && f != 1.0 && f != 2.0) {
          check.reasons.push_back("keypoint flag must be 0, 1 or 2");
          break;
        }
        kps[i] = {k[3 * i].get<double>(), k[3 * i + 1].get<double>(),
                  static_cast<KeypointFlag>(static_cast<int>(f))};
      }
      ann.keypoints = kps;
    }
  }
  if (auto n = check.integer(rec, "num_keypoints", false)) {
    ann.num_keypoints = static_cast<int>(*n);
  } else if (ann.keypoints) {
    ann.num_keypoints = static_cast<int>(std::count_if(
        ann.keypoints->begin(), ann.keypoints->end(),
        [](const Keypoint2D& kp) { return kp.flag != KeypointFlag::kAbsent; }));
  }
  ann.occlusion_tree = check.number(rec, "occlusion_tree");
  ann.occlusion_base = check.number(rec, "occlusion_base");
  ann.distance_m = check.number(rec, "distance_m");
  for (const auto& occ : {ann.occlusion_tree, ann.occlusion_base}) {
    if (occ && (*occ < 0.0 || *occ > 1.0)) check.reasons.push_back("occlusion must lie in [0, 1]");
  }
  if (rec.contains("iscrowd")) {
    const auto& c = rec["iscrowd"];
    if (c.is_boolean()) {
      ann.iscrowd = c.get<bool>();
    } else if (is_integer(c) && (c.get<int>() == 0 || c.get<int>() == 1)) {
      ann.iscrowd = c.get<int>() == 1;
    } else {
      check.reasons.push_back("\"iscrowd\" must be 0 or 1");
    }
  }
  const auto area = check.number(rec, "area");
  if (!check.reasons.empty()) return std::nullopt;
  ann.id = *id;
  ann.image_id = *image_id;
  ann.category_id = *category_id;
  if (area) {
    ann.area = *area;
  } else if (ann.segmentation && image) {
    ann.area = static_cast<double>(segmentation_mask(*ann.segmentation, image->width,
                                                     image->height)->area());
  } else {
    ann.area = ann.bbox.area();
  }
  return ann;
}

template <class Parser, class Out>
void parse_section(const json& doc, const char* key, const char* kind, bool required,
                   ParseResult& result, std::size_t& input_count, std::vector<Out>& out,
                   Parser&& parse) {
  if (!doc.contains(key)) {
    if (required) {
      result.rejected.push_back({"document", std::nullopt, 0,
                                 std::string("missing top-level array \"") + key + "\""});
    }
    return;
  }
  const auto& arr = doc[key];
  if (!arr.is_array()) {
    result.rejected.push_back(
        {"document", std::nullopt, 0, std::string("\"") + key + "\" must be an array"});
    return;
  }
  input_count = arr.size();
  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    RecordCheck check;
    auto rec = parse(arr[i], check);
    if (rec && !seen.insert(rec->id).second) {
      check.reasons.push_back("duplicate id");
      rec.reset();
    }
    if (rec) {
      out.push_back(std::move(*rec));
    } else {
      std::string reason;
      for (std::size_t r = 0; r < check.reasons.size(); ++r) {
        reason += (r ? "; " : "") + check.reasons[r];
      }
      result.rejected.push_back({kind, peek_id(arr[i]), i, reason});
    }
  }
}

}  // namespace

DatasetParseError::DatasetParseError(std::vector<ParseOffense> offenses)
    : FormatError(describe(offenses)), offenses_(std::move(offenses)) {}

ParseResult parse_dataset_report(const json& doc) {
  ParseResult result;
  if (!doc.is_object()) {
    result.rejected.push_back({"document", std::nullopt, 0, "top level must be a JSON object"});
    return result;
  }
  parse_section(doc, "images", "image", true, result, result.input_images, result.index.images,
                [](const json& rec, RecordCheck& c) { return parse_image(rec, c); });
  parse_section(doc, "categories", "category", false, result, result.input_categories,
                result.index.categories,
                [](const json& rec, RecordCheck& c) { return parse_category(rec, c); });
  parse_section(doc, "annotations", "annotation", false, result, result.input_annotations,
                result.index.annotations, [&](const json& rec, RecordCheck& c) {
                  return parse_annotation(rec, result.index, c);
                });
  return result;
}

DatasetIndex parse_dataset(const json& doc) {
  auto result = parse_dataset_report(doc);
  if (!result.rejected.empty()) throw DatasetParseError(std::move(result.rejected));
  return std::move(result.index);
}

DatasetIndex parse_dataset(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DatasetParseError({{"document", std::nullopt, 0, path.string() + ": " + e.what()}});
  }
  return parse_dataset(doc);
}

json to_json(const DatasetIndex& index) {
  json images = json::array();
  for (const auto& img : index.images) {
    json j{{"id", img.id}, {"file_name", img.file_name}, {"width", img.width},
           {"height", img.height}};
    if (img.depth_file_name) j["depth_file_name"] = *img.depth_file_name;
    if (img.intrinsics) {
      j["intrinsics"] = {{"fx", img.intrinsics->fx}, {"fy", img.intrinsics->fy},
                         {"cx", img.intrinsics->cx}, {"cy", img.intrinsics->cy}};
    }
    images.push_back(std::move(j));
  }
  json annotations = json::array();
  for (const auto& a : index.annotations) {
    BBox box = a.bbox;
    if (const auto* img = index.find_image(a.image_id)) box = clip_bbox(box, img->width, img->height);
    json j{{"id", a.id},
           {"image_id", a.image_id},
           {"category_id", a.category_id},
           {"bbox", {box.x, box.y, box.w, box.h}},
           {"area", a.area},
           {"iscrowd", a.iscrowd ? 1 : 0}};
    if (a.segmentation) to_json(j["segmentation"], *a.segmentation);
    if (a.keypoints) {
      json k = json::array();
      for (const auto& kp : *a.keypoints) {
        k.push_back(kp.u);
        k.push_back(kp.v);
        k.push_back(static_cast<int>(kp.flag));
      }
      j["keypoints"] = std::move(k);
      j["num_keypoints"] = a.num_keypoints;
    }
    if (a.occlusion_tree) j["occlusion_tree"] = *a.occlusion_tree;
    if (a.occlusion_base) j["occlusion_base"] = *a.occlusion_base;
    if (a.distance_m) j["distance_m"] = *a.distance_m;
    annotations.push_back(std::move(j));
  }
  json categories = json::array();
  for (const auto& c : index.categories) {
    json j{{"id", c.id}, {"name", c.name}};
    if (!c.keypoint_names.empty()) j["keypoints"] = c.keypoint_names;
    if (!c.skeleton.empty()) j["skeleton"] = c.skeleton;
    categories.push_back(std::move(j));
  }
  return json{{"images", images}, {"annotations", annotations}, {"categories", categories}};
}

std::string dump_dataset(const DatasetIndex& index) {
  const json doc = to_json(index);
  std::string out = "{\n";
  bool first_key = true;
  for (const auto& [key, arr] : doc.items()) {
    if (!first_key) out += ",\n";
    first_key = false;
    out += json(key).dump() + ": [";
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out += i ? ",\n" : "\n";
      out += arr[i].dump();
    }
    out += arr.empty() ? "]" : "\n]";
  }
  out += "\n}\n";
  return out;
}

void write_dataset(const DatasetIndex& index, const std::filesystem::path& path) {
  write_text_file(path, dump_dataset(index));
}

std::optional<Mask> segmentation_mask(const Segmentation& seg, int width, int height) {
  if (const auto* polys = std::get_if<Polygons>(&seg)) {
    return rasterize_polygons(*polys, width, height);
  }
  return decode_rle(std::get<Rle>(seg), width, height);
}

std::optional<Mask> annotation_mask(const AnnotationRecord& ann, const ImageRecord& image) {
  if (!ann.segmentation) return std::nullopt;
  return segmentation_mask(*ann.segmentation, image.width, image.height);
}

BBox clip_bbox(const BBox& box, int width, int height) {
  const double x0 = std::clamp(box.x, 0.0, double(width));
  const double y0 = std::clamp(box.y, 0.0, double(height));
  const double x1 = std::clamp(box.x2(), 0.0, double(width));
  const double y1 = std::clamp(box.y2(), 0.0, double(height));
  return {x0, y0, x1 - x0, y1 - y0};
}

std::vector<FoldSplit> make_folds(const DatasetIndex& index, int n_folds, std::uint64_t seed) {
  if (n_folds < 3) throw ValidationError("need at least 3 folds (train/val/test)");
  const std::size_t n = index.images.size();
  if (n < static_cast<std::size_t>(n_folds)) {
    throw ValidationError("cannot split " + std::to_string(n) + " images into " +
                          std::to_string(n_folds) + " folds");
  }
  std::vector<std::int64_t> ids;
  ids.reserve(n);
  for (const auto& img : index.images) ids.push_back(img.id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  std::vector<std::vector<std::int64_t>> chunks(n_folds);
  std::size_t pos = 0;
  for (int c = 0; c < n_folds; ++c) {
    const std::size_t size = n / n_folds + (static_cast<std::size_t>(c) < n % n_folds ? 1 : 0);
    chunks[c].assign(ids.begin() + pos, ids.begin() + pos + size);
    std::sort(chunks[c].begin(), chunks[c].end());
    pos += size;
  }
  std::vector<FoldSplit> folds;
  for (int k = 0; k < n_folds; ++k) {
    FoldSplit f;
    f.fold_index = k;
    f.test_ids = chunks[k];
    f.val_ids = chunks[(k + 1) % n_folds];
    for (int c = 0; c < n_folds; ++c) {
      if (c == k || c == (k + 1) % n_folds) continue;
      f.train_ids.insert(f.train_ids.end(), chunks[c].begin(), chunks[c].end());
    }
    std::sort(f.train_ids.begin(), f.train_ids.end());
    folds.push_back(std::move(f));
  }
  return folds;
}

json folds_to_json(const std::vector<FoldSplit>& folds, std::uint64_t seed) {
  json arr = json::array();
  for (const auto& f : folds) {
    arr.push_back({{"fold_index", f.fold_index},
                   {"train", f.train_ids},
                   {"val", f.val_ids},
                   {"test", f.test_ids}});
  }
  // Splits are by image only; physical sites may straddle folds.
  return {{"n_folds", folds.size()}, {"seed", seed}, {"sites_segregated", false}, {"folds", arr}};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace timberlens
