#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "foliage/geometry.hpp"
#include "foliage/image.hpp"
#include "foliage/mask.hpp"
#include "foliage/rng.hpp"

namespace foliage {

class AssetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Anchor points are continuous raster coordinates: pixel (i, j) covers
// [i, i+1) x [j, j+1), so a point on the bottom edge of a w x h sprite has y = h.

struct TrunkSprite {
  RgbaImage raster;
  Point base;
  Point spine_bottom;
  Point spine_top;
};

struct LeafSprite {
  RgbaImage raster;
  Point stem;
};

/// Segmented trunk and leaf sprites. Immutable once loaded.
struct AssetBank {
  std::vector<TrunkSprite> trunks;
  std::vector<LeafSprite> leaves;

  /// Throws AssetError if either list is empty or an anchor lies outside its raster.
  void validate() const;
};

/// Reads `dir/assets.json` and the PNG sprites it lists.
AssetBank load_asset_bank(const std::filesystem::path& dir);

/// Writes sprites as trunk_NN.png / leaf_NN.png plus assets.json.
void save_asset_bank(const AssetBank& bank, const std::filesystem::path& dir);

/// Deterministic stand-in bank: tapered bark trunks and elliptical leaves,
/// six of each, every sprite framed by a fully transparent one-pixel border.
AssetBank synthesize_assets(std::uint64_t seed);

struct TreeParams {
  double branch_count_mean = 8.0;  // Poisson mean
  IntRange branch_count{4, 16};    // clip range applied to the Poisson draw
  double attach_span = 0.7;        // upper fraction of the spine eligible for branches
  UniformRange branch_angle_deg{20.0, 80.0};
  UniformRange branch_length{0.2, 0.5};  // fraction of trunk height
  IntRange leaves_per_branch{3, 12};
  UniformRange leaf_scale{0.5, 1.5};
  int alpha_threshold = 128;

  /// Throws std::invalid_argument on empty ranges or out-of-range values.
  void validate() const;

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

/// Branch stroke width at the attachment point and at the tip, as fractions of trunk height.
inline constexpr double kBranchBaseWidth = 0.06;
inline constexpr double kBranchTipWidth = 0.01;
/// Transparent margin around the composed tree, in pixels.
inline constexpr int kTreeMargin = 2;

struct TreeInstance {
  RgbaImage raster;
  BinaryMask occluder_mask;  // alpha > alpha_threshold
  Point base_anchor;
  int trunk_index = 0;
  int branch_count = 0;
  int leaf_count = 0;
};

/// Alpha thresholding used for every occluder mask.
BinaryMask alpha_mask(const RgbaImage& raster, int alpha_threshold);

/// Builds one tree from `bank`. The PRNG (SplitMix64 seeded with `seed`) is
/// consumed in this order:
///   1. trunk index          uniform_int(0, trunks-1)
///   2. branch count         poisson(branch_count_mean), then clipped
///   3. for each branch:     attach fraction, angle, length   (uniform each)
///   4. for each branch:     leaf count (uniform_int), then for each leaf:
///                           leaf index, position along branch, rotation
///                           in [0, 360), scale
/// Branches alternate sides starting on the left; leaves are drawn over
/// branches, branches over the trunk.
TreeInstance generate_tree(const AssetBank& bank, const TreeParams& params, std::uint64_t seed);

}  // namespace foliage
