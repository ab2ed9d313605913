#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "foliage/coco_io.hpp"
#include "foliage/image.hpp"
#include "foliage/maskops.hpp"
#include "foliage/rng.hpp"
#include "foliage/treegen.hpp"

namespace foliage {

/// Where a tree lands: its base anchor sits at (x, image_height), rotated by
/// `angle_deg` about that anchor and scaled uniformly by `scale`.
struct Placement {
  double x = 0.0;
  double angle_deg = 0.0;
  double scale = 1.0;

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct AugmentConfig {
  IntRange trees_per_image{1, 4};
  UniformRange rotation_deg{-20.0, 20.0};  // must be symmetric about 0
  UniformRange height_factor{0.9, 1.2};    // tree height / image height
  std::string person_category = "person";
  std::uint64_t master_seed = 0;
  LevelThresholds thresholds;
  TreeParams tree_params;

  void validate() const;
};

struct AugmentIssue {
  std::int64_t image_id = 0;
  std::optional<std::int64_t> annotation_id;
  std::string message;
};

struct AugmentReport {
  std::int64_t images_processed = 0;
  std::int64_t images_skipped_no_person = 0;
  std::int64_t images_failed = 0;
  std::int64_t trees_placed = 0;
  std::array<std::int64_t, 4> level_counts{};  // person annotations per occlusion level
  std::vector<std::pair<std::int64_t, std::uint64_t>> image_seeds;
  std::vector<AugmentIssue> issues;

  nlohmann::json to_json() const;
};

/// Keeps only images with at least one annotation of `category`, together
/// with all of their annotations. Throws DatasetError for an unknown name.
Dataset filter_person_images(const Dataset& d, std::string_view category);

/// Draws x, then angle, then the height factor from SplitMix64(seed).
Placement place_tree(const TreeInstance& tree, int image_w, int image_h, const AugmentConfig& cfg,
                     std::uint64_t seed);

struct Composited {
  RgbImage image;
  BinaryMask occluder;  // transformed tree mask clipped to the image
};

/// Nearest-neighbour mask resampling, bilinear colour, source-over
/// compositing. Pixels outside the returned occluder are untouched.
Composited composite(const RgbImage& image, const TreeInstance& tree, const Placement& p);

struct AugmentedImage {
  RgbImage image;
  std::vector<Annotation> annotations;
  BinaryMask occluder;
  int tree_count = 0;
  std::vector<AugmentIssue> issues;
};

/// Places trees on one image and rewrites its person annotations. The image
/// PRNG yields the tree count, then per tree a generation seed and a
/// placement seed. Rewritten annotations carry a compressed RLE mask, the
/// tight bbox and pixel area of the visible mask, and occlusion attributes.
AugmentedImage augment_image(const RgbImage& image, std::int64_t image_id, std::span<const Annotation> annotations,
                             std::int64_t person_category_id, const AssetBank& bank, const AugmentConfig& cfg,
                             std::uint64_t image_seed);

/// Augments every person image of `d`. Reads `image_dir/<file_name>` (PNG),
/// writes `output_dir/images/<stem>.png`, `annotations.json` and
/// `report.json`. Per-image seeds come from derive_seed(master_seed, image_id),
/// so output bytes do not depend on `workers`.
AugmentReport augment_dataset(const Dataset& d, const AssetBank& bank, const AugmentConfig& cfg,
                              const std::filesystem::path& image_dir, const std::filesystem::path& output_dir,
                              int workers = 1);

}  // namespace foliage
