#include "foliage/augment.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <unordered_map>

#include "foliage/kernels.hpp"

namespace foliage {

using nlohmann::json;

void AugmentConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("augment config: " + what); };
  if (!trees_per_image.valid() || trees_per_image.lo < 0) bad("trees_per_image range empty or negative");
  if (!rotation_deg.valid() || rotation_deg.lo != -rotation_deg.hi) bad("rotation range must be symmetric [-a, a]");
  if (!height_factor.valid() || height_factor.lo <= 0.0) bad("height_factor range empty or non-positive");
  if (person_category.empty()) bad("person_category is empty");
  thresholds.validate();
  tree_params.validate();
}

json AugmentReport::to_json() const {
  json levels = json::object();
  std::int64_t persons = 0;
  for (OcclusionLevel l : kAllLevels) {
    levels[level_name(l)] = level_counts[std::size_t(level_index(l))];
    persons += level_counts[std::size_t(level_index(l))];
  }
  json seeds = json::array();
  for (const auto& [id, seed] : image_seeds) seeds.push_back({{"image_id", id}, {"seed", seed}});
  json issue_list = json::array();
  for (const AugmentIssue& i : issues) {
    json j{{"image_id", i.image_id}, {"message", i.message}};
    if (i.annotation_id) j["annotation_id"] = *i.annotation_id;
    issue_list.push_back(std::move(j));
  }
  return json{{"images_processed", images_processed},
              {"images_skipped_no_person", images_skipped_no_person},
              {"images_failed", images_failed},
              {"trees_placed", trees_placed},
              {"level_counts", std::move(levels)},
              {"person_annotations", persons},
              {"image_seeds", std::move(seeds)},
              {"issues", std::move(issue_list)}};
}

Dataset filter_person_images(const Dataset& d, std::string_view category) {
  const auto cat = d.category_id(category);
  if (!cat) throw DatasetError("unknown category \"" + std::string(category) + "\"");
  std::set<std::int64_t> keep;
  for (const Annotation& a : d.annotations)
    if (a.category_id == *cat) keep.insert(a.image_id);

  Dataset out;
  out.categories = d.categories;
  out.extra = d.extra;
  for (const ImageRecord& im : d.images)
    if (keep.count(im.id)) out.images.push_back(im);
  for (const Annotation& a : d.annotations)
    if (keep.count(a.image_id)) out.annotations.push_back(a);
  return out;
}

Placement place_tree(const TreeInstance& tree, int image_w, int image_h, const AugmentConfig& cfg,
                     std::uint64_t seed) {
  Rng rng(seed);
  Placement p;
  p.x = rng.uniform01() * image_w;
  p.angle_deg = cfg.rotation_deg.sample(rng);
  const double factor = cfg.height_factor.sample(rng);
  const int tree_h = std::max(1, tree.raster.height());
  p.scale = double(image_h) * factor / double(tree_h);
  return p;
}

Composited composite(const RgbImage& image, const TreeInstance& tree, const Placement& p) {
  Composited out{image, BinaryMask(image.width(), image.height())};
  if (tree.raster.empty() || image.empty() || !(p.scale > 0.0)) return out;

  const double theta = p.angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double ax = p.x;
  const double ay = image.height();
  const Point& base = tree.base_anchor;

  // Inverse of  q = anchor + scale * R(theta) * (src - base).
  SourceMapping map;
  map.a = cs / p.scale;
  map.b = sn / p.scale;
  map.c = -sn / p.scale;
  map.d = cs / p.scale;
  map.tx = base.x - map.a * ax - map.b * ay;
  map.ty = base.y - map.c * ax - map.d * ay;

  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  const double w = tree.raster.width();
  const double h = tree.raster.height();
  for (const Point& corner : {Point{0, 0}, Point{w, 0}, Point{0, h}, Point{w, h}}) {
    const double dx = (corner.x - base.x) * p.scale;
    const double dy = (corner.y - base.y) * p.scale;
    const double qx = ax + cs * dx - sn * dy;
    const double qy = ay + sn * dx + cs * dy;
    min_x = std::min(min_x, qx);
    min_y = std::min(min_y, qy);
    max_x = std::max(max_x, qx);
    max_y = std::max(max_y, qy);
  }
  const PixelRect window = enclosing_pixel_rect(Box{min_x - 1, min_y - 1, max_x - min_x + 2, max_y - min_y + 2},
                                                image.width(), image.height());
  if (window.empty()) return out;
  kernels::composite_masked(out.image, tree.raster, tree.occluder_mask, map, window, out.occluder);
  return out;
}

namespace {

/// Moves opaque "attributes" members kept in `extra` into the typed record.
OcclusionAttributes fresh_attributes(Annotation& a) {
  OcclusionAttributes attrs;
  if (a.attributes) {
    attrs.extra = a.attributes->extra;
  } else if (auto it = a.extra.find("attributes"); it != a.extra.end()) {
    if (it->is_object()) attrs.extra = *it;
    a.extra.erase(it);
  }
  return attrs;
}

}  // namespace

AugmentedImage augment_image(const RgbImage& image, std::int64_t image_id, std::span<const Annotation> annotations,
                             std::int64_t person_category_id, const AssetBank& bank, const AugmentConfig& cfg,
                             std::uint64_t image_seed) {
  AugmentedImage out;
  out.image = image;
  out.occluder = BinaryMask(image.width(), image.height());

  Rng rng(image_seed);
  out.tree_count = cfg.trees_per_image.sample(rng);
  for (int k = 0; k < out.tree_count; ++k) {
    const std::uint64_t tree_seed = rng.next();
    const std::uint64_t place_seed = rng.next();
    const TreeInstance tree = generate_tree(bank, cfg.tree_params, tree_seed);
    const Placement placement = place_tree(tree, image.width(), image.height(), cfg, place_seed);
    Composited step = composite(out.image, tree, placement);
    out.image = std::move(step.image);
    kernels::or_into(out.occluder, step.occluder);
  }

  out.annotations.reserve(annotations.size());
  for (const Annotation& src : annotations) {
    Annotation a = src;
    if (a.category_id != person_category_id) {
      out.annotations.push_back(std::move(a));
      continue;
    }
    std::optional<BinaryMask> mask;
    try {
      mask = segmentation_to_mask(a.segmentation, image.width(), image.height());
    } catch (const std::exception& e) {
      out.issues.push_back({image_id, a.id, std::string("unreadable segmentation: ") + e.what()});
      out.annotations.push_back(std::move(a));
      continue;
    }
    if (!mask || mask->area() == 0) {
      out.issues.push_back({image_id, a.id, "annotation lacks a non-empty segmentation; occlusion attributes omitted"});
      out.annotations.push_back(std::move(a));
      continue;
    }

    const BinaryMask visible = mask_and_not(*mask, out.occluder);
    const double vf = visible_fraction(*mask, visible);
    OcclusionAttributes attrs = fresh_attributes(a);
    attrs.visible_fraction = vf;
    attrs.level = classify_occlusion(1.0 - vf, cfg.thresholds);
    attrs.fully_occluded = vf < kFullyOccludedBelow;

    const RleCounts rle = mask_to_rle(visible);
    a.segmentation = CompressedRle{rle.height, rle.width, rle_encode_string(rle)};
    a.bbox = bbox_of_mask(visible).value_or(Box{0, 0, 0, 0});
    a.area = double(visible.area());
    a.attributes = std::move(attrs);
    out.annotations.push_back(std::move(a));
  }
  return out;
}

namespace {

struct ImageOutcome {
  bool ok = false;
  std::string error;
  std::vector<Annotation> annotations;
  int tree_count = 0;
  std::vector<AugmentIssue> issues;
};

std::string output_name(const ImageRecord& im) {
  return std::filesystem::path(im.file_name).stem().string() + ".png";
}

}  // namespace

AugmentReport augment_dataset(const Dataset& d, const AssetBank& bank, const AugmentConfig& cfg,
                              const std::filesystem::path& image_dir, const std::filesystem::path& output_dir,
                              int workers) {
  cfg.validate();
  bank.validate();
  if (workers < 1) throw std::invalid_argument("worker count must be >= 1");

  AugmentReport report;
  Dataset filtered;
  std::int64_t person_id = -1;
  if (d.images.empty() && !d.category_id(cfg.person_category)) {
    // Nothing to do; still emit a valid (empty) output.
    filtered.categories = d.categories;
    filtered.extra = d.extra;
  } else {
    filtered = filter_person_images(d, cfg.person_category);
    person_id = *d.category_id(cfg.person_category);
  }
  report.images_skipped_no_person = std::int64_t(d.images.size() - filtered.images.size());

  std::set<std::string> names;
  for (const ImageRecord& im : filtered.images)
    if (!names.insert(output_name(im)).second)
      throw DatasetError("two images map to output file " + output_name(im));

  std::unordered_map<std::int64_t, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < filtered.annotations.size(); ++i)
    by_image[filtered.annotations[i].image_id].push_back(i);

  const auto images_out = output_dir / "images";
  std::filesystem::create_directories(images_out);

  const std::int64_t n = std::int64_t(filtered.images.size());
  std::vector<ImageOutcome> outcomes(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::int64_t i = 0; i < n; ++i) {
    const ImageRecord& im = filtered.images[std::size_t(i)];
    ImageOutcome& res = outcomes[std::size_t(i)];
    try {
      const RgbImage pixels = read_png_rgb(image_dir / im.file_name);
      if (pixels.width() != im.width || pixels.height() != im.height)
        throw ImageError("image file is " + std::to_string(pixels.width()) + "x" + std::to_string(pixels.height()) +
                         ", record says " + std::to_string(im.width) + "x" + std::to_string(im.height));
      std::vector<Annotation> anns;
      if (auto it = by_image.find(im.id); it != by_image.end())
        for (std::size_t idx : it->second) anns.push_back(filtered.annotations[idx]);
      AugmentedImage aug = augment_image(pixels, im.id, anns, person_id, bank, cfg, derive_seed(cfg.master_seed, im.id));
      write_png(images_out / output_name(im), aug.image);
      res.annotations = std::move(aug.annotations);
      res.tree_count = aug.tree_count;
      res.issues = std::move(aug.issues);
      res.ok = true;
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  }

  Dataset result;
  result.categories = filtered.categories;
  result.extra = filtered.extra;
  for (std::int64_t i = 0; i < n; ++i) {
    const ImageRecord& im = filtered.images[std::size_t(i)];
    ImageOutcome& res = outcomes[std::size_t(i)];
    report.image_seeds.emplace_back(im.id, derive_seed(cfg.master_seed, im.id));
    if (!res.ok) {
      ++report.images_failed;
      report.issues.push_back({im.id, std::nullopt, "image skipped: " + res.error});
      continue;
    }
    ++report.images_processed;
    report.trees_placed += res.tree_count;
    ImageRecord rec = im;
    rec.file_name = output_name(im);
    result.images.push_back(std::move(rec));
    for (Annotation& a : res.annotations) {
      if (a.category_id == person_id && a.attributes && a.attributes->visible_fraction)
        ++report.level_counts[std::size_t(level_index(a.attributes->level))];
      result.annotations.push_back(std::move(a));
    }
    for (AugmentIssue& issue : res.issues) report.issues.push_back(std::move(issue));
  }

  save_dataset(result, (output_dir / "annotations.json").string());
  std::ofstream rep(output_dir / "report.json", std::ios::trunc);
  rep << report.to_json().dump(2) << "\n";
  if (!rep) throw std::runtime_error("cannot write " + (output_dir / "report.json").string());
  return report;
}

}  // namespace foliage
