#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foliage/coco_io.hpp"
#include "foliage/detector.hpp"
#include "foliage/geometry.hpp"
#include "foliage/maskops.hpp"
#include "foliage/rng.hpp"

namespace foliage {

enum class RegionKind { Positive, Background };

/// An evaluation crop. Positive regions hold exactly one ground-truth person
/// box; background regions hold none.
struct Region {
  std::int64_t image_id = 0;
  PixelRect rect;
  RegionKind kind = RegionKind::Background;
  std::optional<std::int64_t> annotation_id;
  std::optional<OcclusionLevel> level;
  bool overlap_flag = false;  // other GT boxes overlapped the seed and were ignored

  friend bool operator==(const Region&, const Region&) = default;
};

struct RegionFit {
  PixelRect rect;
  bool overlap_flag = false;
};

/// Largest rectangle inside the image that contains `seed` and shares no area
/// with any obstacle disjoint from the seed. Obstacles that overlap the seed
/// are ignored and reported through `overlap_flag`. Ties prefer the wider
/// rectangle, then the smaller left edge, then the smaller top edge.
/// Throws std::invalid_argument if the seed is not inside the image.
RegionFit max_nonoverlap_region(const PixelRect& seed, std::span<const PixelRect> obstacles, int image_w,
                                int image_h);

struct SamplerConstraints {
  int min_side = 16;
  UniformRange aspect{0.25, 4.0};  // width / height

  void validate() const;
};

struct BackgroundSample {
  std::vector<PixelRect> rects;
  std::int64_t attempts = 0;
  bool exhausted = false;  // fewer than requested after n * 1000 attempts
};

/// Rejection sampler: width log-uniform in [min_side, image_w], aspect
/// uniform, position uniform; keeps rectangles with no area shared with any
/// GT box. Draw order per attempt: width, aspect, then x and y only when the
/// size fits the image and satisfies min_side.
BackgroundSample sample_background_regions(std::span<const PixelRect> gt_boxes, int image_w, int image_h,
                                           std::int64_t n, const SamplerConstraints& constraints,
                                           std::uint64_t seed);

inline constexpr std::int64_t kSamplerAttemptsPerRegion = 1000;

struct RegionSet {
  std::vector<Region> regions;
  std::int64_t background_requested = 0;
  std::int64_t background_shortfall = 0;
  std::vector<std::int64_t> exhausted_images;
  std::int64_t flagged = 0;
};

/// One positive region per non-crowd, non-fully-occluded person annotation,
/// plus `n_background` background regions spread round-robin over images.
/// Per-image sampling seeds are derive_seed(seed, image_id).
RegionSet extract_regions(const Dataset& d, std::string_view person_category, std::int64_t n_background,
                          const SamplerConstraints& constraints, std::uint64_t seed);

struct PRPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;

  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

/// precision = tp/(tp+fp), or 1 when tp+fp = 0; recall = tp/(tp+fn), or 0 when tp+fn = 0.
PRPoint pr_point(double threshold, const ConfusionCounts& c);

/// thresholds k/steps for k = 0..steps (default 0.00, 0.01, ..., 1.00).
std::vector<double> threshold_sweep(int steps = 100);

struct EvalResult {
  std::vector<double> thresholds;
  std::array<std::vector<ConfusionCounts>, 4> counts;  // [level][threshold index]

  std::int64_t positives(OcclusionLevel l) const;
  std::int64_t backgrounds() const;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

/// Counts from per-region best person scores (nullopt: no person detection).
/// A positive region is TP at tau iff its best score >= tau; a background
/// region is FP at tau iff its best score >= tau and adds to every level.
EvalResult accumulate(std::span<const Region> regions, std::span<const std::optional<double>> best_scores,
                      std::span<const double> thresholds);

/// Crops every region from `image_dir/<file_name>` and runs the detector;
/// returns the best score among detections of `person_category`. Workers > 1
/// are used only for shareable detectors. Throws DetectorError naming the
/// first failing region index.
std::vector<std::optional<double>> score_regions(const Dataset& d, std::span<const Region> regions,
                                                 Detector& detector, std::string_view person_category,
                                                 const std::filesystem::path& image_dir, int workers = 1);

EvalResult evaluate(const Dataset& d, std::span<const Region> regions, Detector& detector,
                    std::string_view person_category, const std::filesystem::path& image_dir,
                    std::span<const double> thresholds, int workers = 1);

/// Throws std::domain_error when the level has no positive regions.
std::vector<PRPoint> pr_curve(const EvalResult& result, OcclusionLevel level);

/// Greedy IoU matching at one score threshold: detections with score >= tau
/// in descending score order each claim the unmatched GT of highest IoU, if
/// that IoU >= iou_threshold. tn is always 0.
ConfusionCounts standard_counts(std::span<const std::vector<Detection>> detections,
                                std::span<const std::vector<Box>> gts, double iou_threshold, double score_threshold);

std::vector<PRPoint> standard_pr(std::span<const std::vector<Detection>> detections,
                                 std::span<const std::vector<Box>> gts, double iou_threshold,
                                 std::span<const double> thresholds);

// File formats.
nlohmann::json regions_to_json(std::span<const Region> regions);
std::vector<Region> regions_from_json(const nlohmann::json& j);

/// Columns: level,threshold,tp,fp,fn,tn,precision,recall (recall "nan" for a
/// level without positives). Numbers use shortest round-trip formatting.
std::string eval_result_to_csv(const EvalResult& r);
EvalResult eval_result_from_csv(std::string_view csv);

/// Precision-recall plot, one polyline per level that has positives. Levels
/// without positives are listed in `omitted`.
std::string render_pr_svg(const EvalResult& r, std::vector<OcclusionLevel>* omitted = nullptr);

}  // namespace foliage
