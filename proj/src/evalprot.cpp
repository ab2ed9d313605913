#include "foliage/evalprot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace foliage {

using nlohmann::json;

RegionFit max_nonoverlap_region(const PixelRect& seed, std::span<const PixelRect> obstacles, int image_w,
                                int image_h) {
  if (seed.w < 0 || seed.h < 0 || seed.x < 0 || seed.y < 0 || seed.right() > image_w || seed.bottom() > image_h)
    throw std::invalid_argument("seed box lies outside the image");

  RegionFit fit;
  std::vector<PixelRect> blocking;
  for (const PixelRect& o : obstacles) {
    if (o.empty()) continue;
    if (intersects(o, seed)) {
      fit.overlap_flag = true;
      continue;
    }
    blocking.push_back(o);
  }

  std::vector<int> lefts{0};
  std::vector<int> rights{image_w};
  for (const PixelRect& o : blocking) {
    if (o.right() <= seed.x && o.right() > 0) lefts.push_back(o.right());
    if (o.x >= seed.right() && o.x < image_w) rights.push_back(o.x);
  }
  std::sort(lefts.begin(), lefts.end());
  lefts.erase(std::unique(lefts.begin(), lefts.end()), lefts.end());
  std::sort(rights.begin(), rights.end());
  rights.erase(std::unique(rights.begin(), rights.end()), rights.end());

  bool found = false;
  PixelRect best;
  auto better = [](const PixelRect& a, const PixelRect& b) {
    if (a.area() != b.area()) return a.area() > b.area();
    if (a.w != b.w) return a.w > b.w;
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  };
  for (int left : lefts) {
    for (int right : rights) {
      int top = 0;
      int bottom = image_h;
      bool feasible = true;
      for (const PixelRect& o : blocking) {
        if (o.x >= right || o.right() <= left) continue;
        if (o.bottom() <= seed.y) top = std::max(top, o.bottom());
        else if (o.y >= seed.bottom()) bottom = std::min(bottom, o.y);
        else {
          feasible = false;
          break;
        }
      }
      if (!feasible) continue;
      const PixelRect cand{left, top, right - left, bottom - top};
      if (!found || better(cand, best)) {
        best = cand;
        found = true;
      }
    }
  }
  // The seed itself is always feasible, so `found` holds here.
  fit.rect = best;
  return fit;
}

void SamplerConstraints::validate() const {
  if (min_side < 1) throw std::invalid_argument("sampler min_side must be >= 1");
  if (!aspect.valid() || aspect.lo <= 0.0) throw std::invalid_argument("sampler aspect range empty or non-positive");
}

BackgroundSample sample_background_regions(std::span<const PixelRect> gt_boxes, int image_w, int image_h,
                                           std::int64_t n, const SamplerConstraints& constraints,
                                           std::uint64_t seed) {
  constraints.validate();
  BackgroundSample out;
  if (n <= 0) return out;
  if (constraints.min_side > image_w || constraints.min_side > image_h) {
    out.exhausted = true;
    return out;
  }

  Rng rng(seed);
  const std::int64_t budget = n * kSamplerAttemptsPerRegion;
  const double log_lo = std::log(double(constraints.min_side));
  const double log_hi = std::log(double(image_w));
  while (std::int64_t(out.rects.size()) < n && out.attempts < budget) {
    ++out.attempts;
    const int w = int(std::lround(std::exp(rng.uniform(log_lo, log_hi))));
    const double aspect = constraints.aspect.sample(rng);
    const int h = int(std::lround(double(w) / aspect));
    if (w < constraints.min_side || w > image_w || h < constraints.min_side || h > image_h) continue;
    const int x = int(rng.uniform_int(0, image_w - w));
    const int y = int(rng.uniform_int(0, image_h - h));
    const PixelRect cand{x, y, w, h};
    const bool clear = std::none_of(gt_boxes.begin(), gt_boxes.end(),
                                    [&](const PixelRect& g) { return intersects(g, cand); });
    if (clear) out.rects.push_back(cand);
  }
  out.exhausted = std::int64_t(out.rects.size()) < n;
  return out;
}

RegionSet extract_regions(const Dataset& d, std::string_view person_category, std::int64_t n_background,
                          const SamplerConstraints& constraints, std::uint64_t seed) {
  const auto person = d.category_id(person_category);
  if (!person) throw DatasetError("unknown category \"" + std::string(person_category) + "\"");

  std::unordered_map<std::int64_t, std::vector<const Annotation*>> persons;
  for (const Annotation& a : d.annotations) {
    if (a.category_id != *person || a.bbox.w <= 0 || a.bbox.h <= 0) continue;
    persons[a.image_id].push_back(&a);
  }

  RegionSet set;
  set.background_requested = std::max<std::int64_t>(0, n_background);
  for (const ImageRecord& im : d.images) {
    auto it = persons.find(im.id);
    if (it == persons.end()) continue;
    const auto& anns = it->second;
    std::vector<PixelRect> boxes;
    for (const Annotation* a : anns) boxes.push_back(enclosing_pixel_rect(a->bbox, im.width, im.height));
    for (std::size_t i = 0; i < anns.size(); ++i) {
      const Annotation& a = *anns[i];
      if (a.iscrowd) continue;
      if (a.attributes && a.attributes->fully_occluded.value_or(false)) continue;
      if (boxes[i].empty()) continue;
      std::vector<PixelRect> others;
      for (std::size_t j = 0; j < anns.size(); ++j)
        if (j != i) others.push_back(boxes[j]);
      const RegionFit fit = max_nonoverlap_region(boxes[i], others, im.width, im.height);
      Region r;
      r.image_id = im.id;
      r.rect = fit.rect;
      r.kind = RegionKind::Positive;
      r.annotation_id = a.id;
      r.level = a.attributes ? a.attributes->level : OcclusionLevel::L0;
      r.overlap_flag = fit.overlap_flag;
      set.flagged += fit.overlap_flag ? 1 : 0;
      set.regions.push_back(r);
    }
  }

  if (set.background_requested > 0 && !d.images.empty()) {
    const std::int64_t count = std::int64_t(d.images.size());
    for (std::int64_t i = 0; i < count; ++i) {
      const ImageRecord& im = d.images[std::size_t(i)];
      const std::int64_t want = set.background_requested / count + (i < set.background_requested % count ? 1 : 0);
      if (want == 0) continue;
      std::vector<PixelRect> gts;
      if (auto it = persons.find(im.id); it != persons.end())
        for (const Annotation* a : it->second) gts.push_back(enclosing_pixel_rect(a->bbox, im.width, im.height));
      const BackgroundSample s =
          sample_background_regions(gts, im.width, im.height, want, constraints, derive_seed(seed, im.id));
      if (s.exhausted) {
        set.exhausted_images.push_back(im.id);
        set.background_shortfall += want - std::int64_t(s.rects.size());
      }
      for (const PixelRect& rect : s.rects) {
        Region r;
        r.image_id = im.id;
        r.rect = rect;
        r.kind = RegionKind::Background;
        set.regions.push_back(r);
      }
    }
  } else if (set.background_requested > 0) {
    set.background_shortfall = set.background_requested;
  }
  return set;
}

PRPoint pr_point(double threshold, const ConfusionCounts& c) {
  PRPoint p;
  p.threshold = threshold;
  p.precision = (c.tp + c.fp) == 0 ? 1.0 : double(c.tp) / double(c.tp + c.fp);
  p.recall = (c.tp + c.fn) == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fn);
  return p;
}

std::vector<double> threshold_sweep(int steps) {
  if (steps < 1) throw std::invalid_argument("threshold sweep needs at least one step");
  std::vector<double> t(std::size_t(steps) + 1);
  for (int k = 0; k <= steps; ++k) t[std::size_t(k)] = double(k) / double(steps);
  return t;
}

std::int64_t EvalResult::positives(OcclusionLevel l) const {
  const auto& c = counts[std::size_t(level_index(l))];
  return c.empty() ? 0 : c.front().tp + c.front().fn;
}

std::int64_t EvalResult::backgrounds() const {
  const auto& c = counts[0];
  return c.empty() ? 0 : c.front().fp + c.front().tn;
}

EvalResult accumulate(std::span<const Region> regions, std::span<const std::optional<double>> best_scores,
                      std::span<const double> thresholds) {
  if (regions.size() != best_scores.size()) throw std::invalid_argument("one score slot per region required");
  EvalResult r;
  r.thresholds.assign(thresholds.begin(), thresholds.end());
  for (auto& level : r.counts) level.assign(thresholds.size(), ConfusionCounts{});

  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Region& reg = regions[i];
    const std::optional<double>& score = best_scores[i];
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const bool hit = score && *score >= thresholds[t];
      if (reg.kind == RegionKind::Positive) {
        ConfusionCounts& c = r.counts[std::size_t(level_index(reg.level.value_or(OcclusionLevel::L0)))][t];
        (hit ? c.tp : c.fn) += 1;
      } else {
        for (auto& level : r.counts) (hit ? level[t].fp : level[t].tn) += 1;
      }
    }
  }
  return r;
}

namespace {

std::optional<double> best_person_score(const std::vector<Detection>& dets, std::string_view category) {
  std::optional<double> best;
  for (const Detection& d : dets)
    if (d.category == category && (!best || d.score > *best)) best = d.score;
  return best;
}

}  // namespace

std::vector<std::optional<double>> score_regions(const Dataset& d, std::span<const Region> regions,
                                                 Detector& detector, std::string_view person_category,
                                                 const std::filesystem::path& image_dir, int workers) {
  std::unordered_map<std::int64_t, const ImageRecord*> images;
  for (const ImageRecord& im : d.images) images.emplace(im.id, &im);

  // Group by image so each file is decoded once; order follows first use.
  std::vector<std::int64_t> order;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (!images.count(regions[i].image_id))
      throw DatasetError("region " + std::to_string(i) + " references missing image id " +
                         std::to_string(regions[i].image_id));
    auto [it, inserted] = groups.try_emplace(regions[i].image_id);
    if (inserted) order.push_back(regions[i].image_id);
    it->second.push_back(i);
  }

  std::vector<std::optional<double>> scores(regions.size());
  std::vector<std::string> errors(regions.size());
  [[maybe_unused]] const int threads = detector.shareable() ? std::max(1, workers) : 1;
  const std::int64_t n_images = std::int64_t(order.size());
  bool failed = false;

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t g = 0; g < n_images; ++g) {
    bool stop = false;
#pragma omp atomic read
    stop = failed;
    if (stop) continue;
    const ImageRecord& im = *images.at(order[std::size_t(g)]);
    const std::vector<std::size_t>& members = groups.at(im.id);
    RgbImage pixels;
    try {
      pixels = read_png_rgb(image_dir / im.file_name);
    } catch (const std::exception& e) {
      errors[members.front()] = e.what();
#pragma omp atomic write
      failed = true;
      continue;
    }
    for (std::size_t idx : members) {
      try {
        const RgbImage view = crop(pixels, regions[idx].rect);
        CropRequest req{std::int64_t(idx), im.id, regions[idx].rect, &view};
        scores[idx] = best_person_score(detector.detect(req), person_category);
      } catch (const std::exception& e) {
        errors[idx] = e.what();
#pragma omp atomic write
        failed = true;
        break;
      }
    }
  }

  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw DetectorError("region " + std::to_string(i) + ": " + errors[i]);
  return scores;
}

EvalResult evaluate(const Dataset& d, std::span<const Region> regions, Detector& detector,
                    std::string_view person_category, const std::filesystem::path& image_dir,
                    std::span<const double> thresholds, int workers) {
  const auto scores = score_regions(d, regions, detector, person_category, image_dir, workers);
  return accumulate(regions, scores, thresholds);
}

std::vector<PRPoint> pr_curve(const EvalResult& result, OcclusionLevel level) {
  if (result.positives(level) == 0)
    throw std::domain_error("no positive regions at level " + level_name(level) + "; recall undefined");
  const auto& counts = result.counts[std::size_t(level_index(level))];
  std::vector<PRPoint> curve;
  curve.reserve(counts.size());
  for (std::size_t t = 0; t < counts.size(); ++t) curve.push_back(pr_point(result.thresholds[t], counts[t]));
  return curve;
}

ConfusionCounts standard_counts(std::span<const std::vector<Detection>> detections,
                                std::span<const std::vector<Box>> gts, double iou_threshold,
                                double score_threshold) {
  if (detections.size() != gts.size()) throw std::invalid_argument("detections and GTs must cover the same images");
  ConfusionCounts c;
  for (std::size_t img = 0; img < gts.size(); ++img) {
    std::vector<const Detection*> dets;
    for (const Detection& d : detections[img])
      if (d.score >= score_threshold) dets.push_back(&d);
    std::stable_sort(dets.begin(), dets.end(), [](const Detection* a, const Detection* b) { return a->score > b->score; });
    std::vector<bool> matched(gts[img].size(), false);
    for (const Detection* d : dets) {
      std::optional<std::size_t> best;
      double best_iou = -1.0;
      for (std::size_t g = 0; g < gts[img].size(); ++g) {
        if (matched[g]) continue;
        const double iou = box_iou(d->bbox, gts[img][g]);
        if (iou > best_iou) {
          best = g;
          best_iou = iou;
        }
      }
      if (best && best_iou >= iou_threshold) {
        matched[*best] = true;
        ++c.tp;
      } else {
        ++c.fp;
      }
    }
    c.fn += std::int64_t(std::count(matched.begin(), matched.end(), false));
  }
  return c;
}

std::vector<PRPoint> standard_pr(std::span<const std::vector<Detection>> detections,
                                 std::span<const std::vector<Box>> gts, double iou_threshold,
                                 std::span<const double> thresholds) {
  std::vector<PRPoint> out;
  for (double t : thresholds) out.push_back(pr_point(t, standard_counts(detections, gts, iou_threshold, t)));
  return out;
}

json regions_to_json(std::span<const Region> regions) {
  json arr = json::array();
  for (const Region& r : regions) {
    json j{{"image_id", r.image_id},
           {"rect", {r.rect.x, r.rect.y, r.rect.w, r.rect.h}},
           {"kind", r.kind == RegionKind::Positive ? "positive" : "background"},
           {"overlap_flag", r.overlap_flag}};
    if (r.annotation_id) j["annotation_id"] = *r.annotation_id;
    if (r.level) j["occlusion_level"] = level_index(*r.level);
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<Region> regions_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("regions file must hold a JSON array");
  std::vector<Region> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string where = "region " + std::to_string(i);
    if (!e.is_object()) throw std::invalid_argument(where + " must be an object");
    Region r;
    try {
      r.image_id = e.at("image_id").get<std::int64_t>();
      const json& rect = e.at("rect");
      if (!rect.is_array() || rect.size() != 4) throw std::invalid_argument(where + ": rect must be [x, y, w, h]");
      r.rect = PixelRect{rect[0].get<int>(), rect[1].get<int>(), rect[2].get<int>(), rect[3].get<int>()};
      const std::string kind = e.at("kind").get<std::string>();
      if (kind == "positive") r.kind = RegionKind::Positive;
      else if (kind == "background") r.kind = RegionKind::Background;
      else throw std::invalid_argument(where + ": unknown kind \"" + kind + "\"");
      if (e.contains("annotation_id")) r.annotation_id = e["annotation_id"].get<std::int64_t>();
      if (e.contains("occlusion_level")) r.level = level_from_index(e["occlusion_level"].get<int>());
      r.overlap_flag = e.value("overlap_flag", false);
    } catch (const json::exception& ex) {
      throw std::invalid_argument(where + ": " + ex.what());
    }
    if (r.kind == RegionKind::Positive && !r.level) r.level = OcclusionLevel::L0;
    out.push_back(r);
  }
  return out;
}

namespace {

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_double(std::string_view s, std::size_t line) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument("eval CSV line " + std::to_string(line) + ": bad number \"" + std::string(s) + "\"");
  return v;
}

std::int64_t parse_count(std::string_view s, std::size_t line) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0)
    throw std::invalid_argument("eval CSV line " + std::to_string(line) + ": bad count \"" + std::string(s) + "\"");
  return v;
}

constexpr std::string_view kCsvHeader = "level,threshold,tp,fp,fn,tn,precision,recall";

}  // namespace

std::string eval_result_to_csv(const EvalResult& r) {
  std::string out(kCsvHeader);
  out += '\n';
  for (OcclusionLevel level : kAllLevels) {
    const auto& counts = r.counts[std::size_t(level_index(level))];
    for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
      const ConfusionCounts& c = counts[t];
      const PRPoint p = pr_point(r.thresholds[t], c);
      const double recall = (c.tp + c.fn) == 0 ? std::nan("") : p.recall;
      out += level_name(level) + ',' + shortest(r.thresholds[t]) + ',' + std::to_string(c.tp) + ',' +
             std::to_string(c.fp) + ',' + std::to_string(c.fn) + ',' + std::to_string(c.tn) + ',' +
             shortest(p.precision) + ',' + shortest(recall) + '\n';
    }
  }
  return out;
}

EvalResult eval_result_from_csv(std::string_view csv) {
  std::vector<std::string_view> lines;
  while (!csv.empty()) {
    const auto nl = csv.find('\n');
    std::string_view line = csv.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
  }
  if (lines.empty() || lines.front() != kCsvHeader) throw std::invalid_argument("eval CSV: missing or wrong header");

  std::array<std::vector<double>, 4> thresholds;
  EvalResult r;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string_view> f;
    std::string_view rest = lines[i];
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (f.size() != 8) throw std::invalid_argument("eval CSV line " + std::to_string(i + 1) + ": expected 8 fields");
    if (f[0].size() != 2 || f[0][0] != 'L' || f[0][1] < '0' || f[0][1] > '3')
      throw std::invalid_argument("eval CSV line " + std::to_string(i + 1) + ": bad level");
    const auto li = std::size_t(f[0][1] - '0');
    thresholds[li].push_back(parse_double(f[1], i + 1));
    r.counts[li].push_back(ConfusionCounts{parse_count(f[2], i + 1), parse_count(f[3], i + 1),
                                           parse_count(f[4], i + 1), parse_count(f[5], i + 1)});
  }
  for (std::size_t li = 1; li < 4; ++li)
    if (thresholds[li] != thresholds[0]) throw std::invalid_argument("eval CSV: levels use different thresholds");
  r.thresholds = thresholds[0];
  return r;
}

std::string render_pr_svg(const EvalResult& r, std::vector<OcclusionLevel>* omitted) {
  constexpr int kW = 640, kH = 480;
  constexpr double kX0 = 70, kY0 = 50, kX1 = 600, kY1 = 420;
  constexpr const char* kColors[4] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a"};
  auto px = [&](double recall) { return kX0 + recall * (kX1 - kX0); };
  auto py = [&](double precision) { return kY1 - precision * (kY1 - kY0); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
    << kW << ' ' << kH << "\">\n";
  s << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << kW / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
    << "Precision vs. recall by occlusion level</text>\n";
  s << "<g stroke=\"black\" stroke-width=\"1\">\n";
  s << "<line x1=\"" << num(kX0) << "\" y1=\"" << num(kY1) << "\" x2=\"" << num(kX1) << "\" y2=\"" << num(kY1)
    << "\"/>\n";
  s << "<line x1=\"" << num(kX0) << "\" y1=\"" << num(kY0) << "\" x2=\"" << num(kX0) << "\" y2=\"" << num(kY1)
    << "\"/>\n";
  s << "</g>\n";
  s << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = k / 5.0;
    s << "<text x=\"" << num(px(v)) << "\" y=\"" << num(kY1 + 16) << "\" text-anchor=\"middle\">" << num(v)
      << "</text>\n";
    s << "<text x=\"" << num(kX0 - 8) << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">" << num(v)
      << "</text>\n";
  }
  s << "</g>\n";
  s << "<text x=\"" << num((kX0 + kX1) / 2) << "\" y=\"" << num(kY1 + 40)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">Recall</text>\n";
  s << "<text x=\"20\" y=\"" << num((kY0 + kY1) / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"13\" transform=\"rotate(-90 20 " << num((kY0 + kY1) / 2) << ")\">Precision</text>\n";

  int legend_row = 0;
  for (OcclusionLevel level : kAllLevels) {
    if (r.positives(level) == 0) {
      if (omitted) omitted->push_back(level);
      continue;
    }
    const auto curve = pr_curve(r, level);
    const char* color = kColors[level_index(level)];
    s << "<polyline class=\"level-" << level_name(level) << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i) {
      if (i) s << ' ';
      s << num(px(curve[i].recall)) << ',' << num(py(curve[i].precision));
    }
    s << "\"/>\n";
    const double ly = kY0 + 10 + 18 * legend_row++;
    s << "<line x1=\"" << num(kX1 - 90) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kX1 - 70) << "\" y2=\""
      << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << num(kX1 - 64) << "\" y=\"" << num(ly + 4) << "\" font-family=\"sans-serif\" font-size=\"12\">"
      << level_name(level) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace foliage
