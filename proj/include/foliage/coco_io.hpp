#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "foliage/geometry.hpp"
#include "foliage/mask.hpp"
#include "foliage/maskops.hpp"

namespace foliage {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// COCO uncompressed RLE: column-major runs, the first run counts zeros.
struct RleCounts {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleCounts&, const RleCounts&) = default;
};

/// COCO compressed RLE, kept as the original string for verbatim round trips.
struct CompressedRle {
  int height = 0;
  int width = 0;
  std::string counts;

  friend bool operator==(const CompressedRle&, const CompressedRle&) = default;
};

using Segmentation = std::variant<std::monostate, std::vector<Polygon>, RleCounts, CompressedRle>;

/// Occlusion metadata under an annotation's "attributes" key. Ingested data
/// may carry only the level, so the two measured fields are optional.
struct OcclusionAttributes {
  OcclusionLevel level = OcclusionLevel::L0;
  std::optional<double> visible_fraction;
  std::optional<bool> fully_occluded;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const OcclusionAttributes&, const OcclusionAttributes&) = default;
};

struct Category {
  std::int64_t id = 0;
  std::string name;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const Category&, const Category&) = default;
};

struct ImageRecord {
  std::int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  Box bbox;
  double area = 0.0;
  Segmentation segmentation;
  bool iscrowd = false;
  std::optional<OcclusionAttributes> attributes;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// A COCO instance dataset. `extra` members hold keys this toolkit does not
/// interpret (info, licenses, ...) and are written back unchanged.
struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;
  nlohmann::json extra = nlohmann::json::object();

  const ImageRecord* find_image(std::int64_t id) const;
  std::optional<std::int64_t> category_id(std::string_view name) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Throws DatasetError on malformed input or broken id references.
Dataset parse_dataset(std::string_view document);
Dataset load_dataset(const std::string& path);

/// Keys are emitted in sorted order; output is byte-stable for equal datasets.
std::string serialize_dataset(const Dataset& d);
void save_dataset(const Dataset& d, const std::string& path);

/// Checks id uniqueness, references, image sizes and bbox bounds.
void validate_dataset(const Dataset& d);

/// Pixel (r, c) is set iff (c + 0.5, r + 0.5) lies inside some polygon under
/// the even-odd rule. Throws MaskError for polygons with fewer than 3 vertices.
BinaryMask polygon_to_mask(std::span<const Polygon> polygons, int width, int height);

RleCounts mask_to_rle(const BinaryMask& m);
BinaryMask rle_to_mask(const RleCounts& r);

std::string rle_encode_string(const RleCounts& r);
RleCounts rle_decode_string(std::string_view s, int height, int width);

/// Rasterizes any segmentation form onto a width x height canvas.
/// Returns nullopt for an empty segmentation.
std::optional<BinaryMask> segmentation_to_mask(const Segmentation& s, int width, int height);

}  // namespace foliage
