#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "foliage/geometry.hpp"
#include "foliage/mask.hpp"

namespace foliage {

enum class OcclusionLevel : int { L0 = 0, L1 = 1, L2 = 2, L3 = 3 };

inline constexpr std::array<OcclusionLevel, 4> kAllLevels = {
    OcclusionLevel::L0, OcclusionLevel::L1, OcclusionLevel::L2, OcclusionLevel::L3};

inline constexpr int level_index(OcclusionLevel l) { return static_cast<int>(l); }
std::string level_name(OcclusionLevel l);
OcclusionLevel level_from_index(int i);

/// Cut points on the occluded fraction; 0 < t1 < t2 < t3 < 1.
struct LevelThresholds {
  double t1 = 0.05;
  double t2 = 0.35;
  double t3 = 0.65;

  void validate() const;

  friend bool operator==(const LevelThresholds&, const LevelThresholds&) = default;
};

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Visible fraction below this marks an annotation fully occluded.
inline constexpr double kFullyOccludedBelow = 0.01;

/// base AND NOT occluder. Throws MaskError on dimension mismatch.
BinaryMask mask_and_not(const BinaryMask& base, const BinaryMask& occluder);

/// Per-pixel OR of two equally sized masks.
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);

/// area(occluded) / area(original). Throws MaskError if original is empty,
/// shapes differ, or occluded is not a subset of original.
double visible_fraction(const BinaryMask& original, const BinaryMask& occluded);

double box_iou(const Box& a, const Box& b);

std::optional<Box> bbox_of_mask(const BinaryMask& m);

OcclusionLevel classify_occlusion(double occluded_fraction, const LevelThresholds& th = {});

}  // namespace foliage
