#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "timberlens/common.hpp"
#include "timberlens/mask.hpp"

namespace timberlens {

using Polygons = std::vector<std::vector<double>>;
using Segmentation = std::variant<Polygons, Rle>;

struct ImageRecord {
  std::int64_t id = 0;
  std::string file_name;
  std::optional<std::string> depth_file_name;
  int width = 0;
  int height = 0;
  // Not part of COCO; written by the generator so depth-based keypoint
  // evaluation needs no side channel.
  std::optional<CameraIntrinsics> intrinsics;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct AnnotationRecord {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 1;
  BBox bbox;
  std::optional<Segmentation> segmentation;
  double area = 0.0;
  std::optional<KeypointSet> keypoints;
  int num_keypoints = 0;
  std::optional<double> occlusion_tree;
  std::optional<double> occlusion_base;
  std::optional<double> distance_m;
  bool iscrowd = false;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct CategoryDef {
  std::int64_t id = 1;
  std::string name = "tree";
  std::vector<std::string> keypoint_names;
  std::vector<std::array<int, 2>> skeleton;

  friend bool operator==(const CategoryDef&, const CategoryDef&) = default;
};

/// The single-class schema: "tree" with the five harvesting keypoints.
CategoryDef tree_category();

struct DatasetIndex {
  std::vector<ImageRecord> images;
  std::vector<AnnotationRecord> annotations;
  std::vector<CategoryDef> categories;

  const ImageRecord* find_image(std::int64_t id) const;
  /// Category id named "tree", if any.
  std::optional<std::int64_t> tree_category_id() const;

  friend bool operator==(const DatasetIndex&, const DatasetIndex&) = default;
};

struct ParseOffense {
  std::string kind;  // "image", "annotation", "category", "document"
  std::optional<std::int64_t> id;
  std::size_t position = 0;
  std::string reason;
};

struct ParseResult {
  DatasetIndex index;
  std::vector<ParseOffense> rejected;
  std::size_t input_images = 0;
  std::size_t input_annotations = 0;
  std::size_t input_categories = 0;
};

/// Raised by the strict parsers; carries every offending record, not just
/// the first.
class DatasetParseError : public FormatError {
 public:
  explicit DatasetParseError(std::vector<ParseOffense> offenses);
  const std::vector<ParseOffense>& offenses() const { return offenses_; }

 private:
  std::vector<ParseOffense> offenses_;
};

/// Lenient parse: keeps every valid record and lists every rejected one with
/// its reason. parsed + rejected always equals the input count per section.
ParseResult parse_dataset_report(const nlohmann::json& doc);

DatasetIndex parse_dataset(const nlohmann::json& doc);
DatasetIndex parse_dataset(const std::filesystem::path& path);

nlohmann::json to_json(const DatasetIndex& index);
void to_json(nlohmann::json& j, const Segmentation& seg);
std::optional<Segmentation> segmentation_from_json(const nlohmann::json& j, int height, int width,
                                                   std::string& error);

/// One record per line, keys sorted; parse(write(x)) == x for valid x.
std::string dump_dataset(const DatasetIndex& index);
void write_dataset(const DatasetIndex& index, const std::filesystem::path& path);

/// Pixel mask of an annotation in its image's frame; nullopt when the
/// record carries no segmentation.
std::optional<Mask> annotation_mask(const AnnotationRecord& ann, const ImageRecord& image);
std::optional<Mask> segmentation_mask(const Segmentation& seg, int width, int height);

BBox clip_bbox(const BBox& box, int width, int height);

struct FoldSplit {
  int fold_index = 0;
  std::vector<std::int64_t> train_ids;
  std::vector<std::int64_t> val_ids;
  std::vector<std::int64_t> test_ids;
};

/// Shuffled round-robin split into n_folds chunks: fold k tests on chunk k,
/// validates on chunk k+1 and trains on the rest (60/20/20 for five folds).
std::vector<FoldSplit> make_folds(const DatasetIndex& index, int n_folds, std::uint64_t seed);
nlohmann::json folds_to_json(const std::vector<FoldSplit>& folds, std::uint64_t seed);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace timberlens
