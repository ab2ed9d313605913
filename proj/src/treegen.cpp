#include "foliage/treegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "foliage/kernels.hpp"

namespace foliage {

using nlohmann::json;

namespace {

bool inside_raster(const Point& p, const RgbaImage& r) {
  return p.x >= 0 && p.y >= 0 && p.x <= r.width() && p.y <= r.height();
}

std::string fmt_point(const Point& p) {
  std::ostringstream s;
  s << "(" << p.x << ", " << p.y << ")";
  return s.str();
}

Point read_point(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw AssetError(where + ": expected [x, y]");
  return {v[0].get<double>(), v[1].get<double>()};
}

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

/// Straight-alpha source-over of one RGBA pixel onto another.
void blend_over(std::uint8_t* dst, const std::uint8_t* src) {
  const double sa = src[3] / 255.0;
  if (sa <= 0.0) return;
  if (src[3] == 255) {
    std::copy(src, src + 4, dst);
    return;
  }
  const double da = dst[3] / 255.0;
  const double oa = sa + da * (1.0 - sa);
  for (int ch = 0; ch < 3; ++ch) dst[ch] = clamp_u8((src[ch] * sa + dst[ch] * da * (1.0 - sa)) / oa);
  dst[3] = clamp_u8(oa * 255.0);
}

Point rotate(const Point& v, double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  return {v.x * c - v.y * s, v.x * s + v.y * c};
}

struct BranchShape {
  Polygon quad;  // trunk-sprite coordinates
  Point start;
  Point dir;
  double length = 0.0;
};

struct LeafPlacement {
  int index = 0;
  Point at;  // where the stem lands, trunk-sprite coordinates
  double rotation = 0.0;  // radians
  double scale = 1.0;
};

struct Bounds {
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  void add(const Point& p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
};

Point leaf_to_tree(const LeafSprite& leaf, const LeafPlacement& lp, const Point& local) {
  const Point d = rotate({local.x - leaf.stem.x, local.y - leaf.stem.y}, lp.rotation);
  return {lp.at.x + lp.scale * d.x, lp.at.y + lp.scale * d.y};
}

Rgb mean_opaque_color(const RgbaImage& r) {
  double sum[3] = {0, 0, 0};
  std::int64_t n = 0;
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      const std::uint8_t* p = r.pixel(x, y);
      if (p[3] < 128) continue;
      for (int ch = 0; ch < 3; ++ch) sum[ch] += p[ch];
      ++n;
    }
  }
  if (n == 0) return Rgb{90, 62, 40};
  return Rgb{clamp_u8(sum[0] / double(n)), clamp_u8(sum[1] / double(n)), clamp_u8(sum[2] / double(n))};
}

}  // namespace

void AssetBank::validate() const {
  if (trunks.empty()) throw AssetError("asset bank has no trunk sprites");
  if (leaves.empty()) throw AssetError("asset bank has no leaf sprites");
  for (std::size_t i = 0; i < trunks.size(); ++i) {
    const TrunkSprite& t = trunks[i];
    const std::string where = "trunk " + std::to_string(i);
    if (t.raster.empty()) throw AssetError(where + ": empty raster");
    for (const Point* p : {&t.base, &t.spine_bottom, &t.spine_top})
      if (!inside_raster(*p, t.raster)) throw AssetError(where + ": anchor " + fmt_point(*p) + " outside raster");
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const LeafSprite& l = leaves[i];
    const std::string where = "leaf " + std::to_string(i);
    if (l.raster.empty()) throw AssetError(where + ": empty raster");
    if (!inside_raster(l.stem, l.raster)) throw AssetError(where + ": stem " + fmt_point(l.stem) + " outside raster");
  }
}

AssetBank load_asset_bank(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "assets.json";
  std::ifstream in(manifest_path);
  if (!in) throw AssetError("missing asset manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw AssetError("malformed asset manifest: " + std::string(e.what()));
  }

  AssetBank bank;
  auto load = [&](const json& entry, const std::string& where) {
    if (!entry.is_object() || !entry.contains("file") || !entry["file"].is_string())
      throw AssetError(where + ": missing \"file\"");
    try {
      return read_png_rgba(dir / entry["file"].get<std::string>());
    } catch (const ImageError& e) {
      throw AssetError(where + ": " + e.what());
    }
  };
  if (manifest.contains("trunks")) {
    int i = 0;
    for (const json& t : manifest["trunks"]) {
      const std::string where = "trunk " + std::to_string(i++);
      TrunkSprite s;
      s.raster = load(t, where);
      s.base = read_point(t.value("base", json()), where + " base");
      const json& spine = t.value("spine", json());
      if (!spine.is_array() || spine.size() != 2) throw AssetError(where + ": spine must be [[x0,y0],[x1,y1]]");
      s.spine_bottom = read_point(spine[0], where + " spine");
      s.spine_top = read_point(spine[1], where + " spine");
      bank.trunks.push_back(std::move(s));
    }
  }
  if (manifest.contains("leaves")) {
    int i = 0;
    for (const json& l : manifest["leaves"]) {
      const std::string where = "leaf " + std::to_string(i++);
      LeafSprite s;
      s.raster = load(l, where);
      s.stem = read_point(l.value("stem", json()), where + " stem");
      bank.leaves.push_back(std::move(s));
    }
  }
  bank.validate();
  return bank;
}

void save_asset_bank(const AssetBank& bank, const std::filesystem::path& dir) {
  bank.validate();
  std::error_code ec;
  std::filesystem::create_directory(dir, ec);  // non-recursive: a missing parent is an error
  if (!std::filesystem::is_directory(dir)) throw AssetError("cannot create asset directory " + dir.string());
  auto name = [](const char* stem, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%02zu.png", stem, i);
    return std::string(buf);
  };
  json manifest{{"trunks", json::array()}, {"leaves", json::array()}};
  for (std::size_t i = 0; i < bank.trunks.size(); ++i) {
    const TrunkSprite& t = bank.trunks[i];
    const std::string file = name("trunk", i);
    write_png(dir / file, t.raster);
    manifest["trunks"].push_back({{"file", file},
                                  {"base", {t.base.x, t.base.y}},
                                  {"spine", {{t.spine_bottom.x, t.spine_bottom.y}, {t.spine_top.x, t.spine_top.y}}}});
  }
  for (std::size_t i = 0; i < bank.leaves.size(); ++i) {
    const LeafSprite& l = bank.leaves[i];
    const std::string file = name("leaf", i);
    write_png(dir / file, l.raster);
    manifest["leaves"].push_back({{"file", file}, {"stem", {l.stem.x, l.stem.y}}});
  }
  std::ofstream out(dir / "assets.json", std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw AssetError("cannot write " + (dir / "assets.json").string());
}

AssetBank synthesize_assets(std::uint64_t seed) {
  constexpr int kTrunks = 6;
  constexpr int kLeaves = 6;
  Rng rng(seed);
  AssetBank bank;

  for (int t = 0; t < kTrunks; ++t) {
    const int height = int(rng.uniform_int(140, 220));
    const double base_w = double(rng.uniform_int(12, 22));
    const double top_w = std::max(3.0, base_w * rng.uniform(0.25, 0.5));
    const double bark = rng.uniform(70.0, 110.0);
    const int w = int(base_w) + 4;
    const int h = height + 2;
    const double cx = w / 2.0;

    TrunkSprite s;
    s.raster = RgbaImage(w, h);
    for (int y = 1; y <= height; ++y) {
      const double up = double(height - y) / double(height - 1);  // 0 at the bottom row
      const double half = (base_w + (top_w - base_w) * up) / 2.0;
      for (int x = 1; x < w - 1; ++x) {
        if (std::abs(x + 0.5 - cx) >= half) continue;
        const double noise = rng.uniform(-12.0, 12.0);
        std::uint8_t* p = s.raster.pixel(x, y);
        p[0] = clamp_u8(bark + noise);
        p[1] = clamp_u8(bark * 0.7 + noise);
        p[2] = clamp_u8(bark * 0.45 + noise);
        p[3] = 255;
      }
    }
    s.base = {cx, double(h - 1)};
    s.spine_bottom = {cx, double(h - 1)};
    s.spine_top = {cx, 1.0};
    bank.trunks.push_back(std::move(s));
  }

  for (int l = 0; l < kLeaves; ++l) {
    const double a = rng.uniform(7.0, 13.0);
    const double b = a * rng.uniform(0.35, 0.55);
    const double green = rng.uniform(90.0, 170.0);
    const int w = int(std::ceil(2 * a)) + 4;
    const int h = int(std::ceil(2 * b)) + 4;
    const double cx = w / 2.0;
    const double cy = h / 2.0;

    LeafSprite s;
    s.raster = RgbaImage(w, h);
    for (int y = 1; y < h - 1; ++y) {
      for (int x = 1; x < w - 1; ++x) {
        const double dx = (x + 0.5 - cx) / a;
        const double dy = (y + 0.5 - cy) / b;
        const double d = std::sqrt(dx * dx + dy * dy);
        // About one pixel of soft edge along the minor axis.
        const double coverage = std::clamp((1.0 - d) * b + 0.5, 0.0, 1.0);
        if (coverage <= 0.0) continue;
        const double noise = rng.uniform(-15.0, 15.0);
        std::uint8_t* p = s.raster.pixel(x, y);
        p[0] = clamp_u8(green * 0.45 + noise);
        p[1] = clamp_u8(green + noise);
        p[2] = clamp_u8(green * 0.3 + noise);
        p[3] = clamp_u8(coverage * 255.0);
      }
    }
    s.stem = {cx - a, cy};
    bank.leaves.push_back(std::move(s));
  }
  return bank;
}

void TreeParams::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("tree params: " + what); };
  if (!(branch_count_mean >= 0.0)) bad("branch_count_mean must be >= 0");
  if (!branch_count.valid() || branch_count.lo < 0) bad("branch_count range empty or negative");
  if (!(attach_span > 0.0 && attach_span <= 1.0)) bad("attach_span must lie in (0, 1]");
  if (!branch_angle_deg.valid()) bad("branch_angle_deg range empty");
  if (!branch_length.valid() || branch_length.lo < 0.0) bad("branch_length range empty or negative");
  if (!leaves_per_branch.valid() || leaves_per_branch.lo < 0) bad("leaves_per_branch range empty or negative");
  if (!leaf_scale.valid() || leaf_scale.lo <= 0.0) bad("leaf_scale range empty or non-positive");
  if (alpha_threshold < 0 || alpha_threshold > 255) bad("alpha_threshold must lie in [0, 255]");
}

BinaryMask alpha_mask(const RgbaImage& raster, int alpha_threshold) {
  BinaryMask m(raster.width(), raster.height());
  const auto& px = raster.data();
  auto& bits = m.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = px[4 * i + 3] > alpha_threshold ? 1 : 0;
  return m;
}

TreeInstance generate_tree(const AssetBank& bank, const TreeParams& params, std::uint64_t seed) {
  bank.validate();
  params.validate();
  Rng rng(seed);

  TreeInstance tree;
  tree.trunk_index = int(rng.uniform_int(0, std::int64_t(bank.trunks.size()) - 1));
  const TrunkSprite& trunk = bank.trunks[std::size_t(tree.trunk_index)];
  const std::int64_t drawn = rng.poisson(params.branch_count_mean);
  tree.branch_count = int(std::clamp<std::int64_t>(drawn, params.branch_count.lo, params.branch_count.hi));

  Point spine{trunk.spine_top.x - trunk.spine_bottom.x, trunk.spine_top.y - trunk.spine_bottom.y};
  double trunk_h = std::hypot(spine.x, spine.y);
  Point axis{0.0, -1.0};
  if (trunk_h > 0.0) {
    axis = {spine.x / trunk_h, spine.y / trunk_h};
  } else {
    // Degenerate spine: treat the raster height as a vertical trunk.
    trunk_h = trunk.raster.height();
    spine = {0.0, -trunk_h};
  }

  constexpr double kDeg = std::numbers::pi / 180.0;
  std::vector<BranchShape> branches;
  for (int i = 0; i < tree.branch_count; ++i) {
    const double attach = rng.uniform(1.0 - params.attach_span, 1.0);
    const double angle = params.branch_angle_deg.sample(rng);
    const double length = params.branch_length.sample(rng) * trunk_h;
    const double side = (i % 2 == 0) ? -1.0 : 1.0;

    BranchShape b;
    b.start = {trunk.spine_bottom.x + attach * spine.x, trunk.spine_bottom.y + attach * spine.y};
    b.dir = rotate(axis, side * angle * kDeg);
    b.length = length;
    const Point end{b.start.x + length * b.dir.x, b.start.y + length * b.dir.y};
    const Point normal{-b.dir.y, b.dir.x};
    const double w0 = kBranchBaseWidth * trunk_h / 2.0;
    const double w1 = kBranchTipWidth * trunk_h / 2.0;
    b.quad = {{b.start.x + normal.x * w0, b.start.y + normal.y * w0},
              {end.x + normal.x * w1, end.y + normal.y * w1},
              {end.x - normal.x * w1, end.y - normal.y * w1},
              {b.start.x - normal.x * w0, b.start.y - normal.y * w0}};
    branches.push_back(std::move(b));
  }

  std::vector<LeafPlacement> leaves;
  for (const BranchShape& b : branches) {
    const int count = params.leaves_per_branch.sample(rng);
    for (int k = 0; k < count; ++k) {
      LeafPlacement lp;
      lp.index = int(rng.uniform_int(0, std::int64_t(bank.leaves.size()) - 1));
      const double along = rng.uniform01() * b.length;
      lp.at = {b.start.x + along * b.dir.x, b.start.y + along * b.dir.y};
      lp.rotation = rng.uniform(0.0, 360.0) * kDeg;
      lp.scale = params.leaf_scale.sample(rng);
      leaves.push_back(lp);
    }
  }
  tree.leaf_count = int(leaves.size());

  // Canvas in trunk-sprite coordinates, shifted by an integer origin so the
  // trunk copies over without resampling.
  Bounds bounds;
  bounds.add({0.0, 0.0});
  bounds.add({double(trunk.raster.width()), double(trunk.raster.height())});
  for (const BranchShape& b : branches)
    for (const Point& p : b.quad) bounds.add(p);
  for (const LeafPlacement& lp : leaves) {
    const RgbaImage& r = bank.leaves[std::size_t(lp.index)].raster;
    const LeafSprite& leaf = bank.leaves[std::size_t(lp.index)];
    for (const Point& corner : {Point{0, 0}, Point{double(r.width()), 0}, Point{0, double(r.height())},
                                Point{double(r.width()), double(r.height())}})
      bounds.add(leaf_to_tree(leaf, lp, corner));
  }
  const int ox = int(std::floor(bounds.min_x)) - kTreeMargin;
  const int oy = int(std::floor(bounds.min_y)) - kTreeMargin;
  const int width = int(std::ceil(bounds.max_x)) + kTreeMargin - ox;
  const int height = int(std::ceil(bounds.max_y)) + kTreeMargin - oy;

  RgbaImage canvas(width, height);
  for (int y = 0; y < trunk.raster.height(); ++y) {
    const std::uint8_t* src = trunk.raster.pixel(0, y);
    std::copy(src, src + std::size_t(trunk.raster.width()) * 4, canvas.pixel(-ox, y - oy));
  }

  const Rgb bark = mean_opaque_color(trunk.raster);
  const std::uint8_t bark_px[4] = {bark.r, bark.g, bark.b, 255};
  for (const BranchShape& b : branches) {
    Polygon shifted;
    for (const Point& p : b.quad) shifted.push_back({p.x - ox, p.y - oy});
    BinaryMask stroke(width, height);
    kernels::fill_polygons(std::span<const Polygon>(&shifted, 1), stroke);
    for (int y = 0; y < height; ++y) {
      const std::uint8_t* row = stroke.row(y);
      for (int x = 0; x < width; ++x)
        if (row[x]) std::copy(bark_px, bark_px + 4, canvas.pixel(x, y));
    }
  }

  for (const LeafPlacement& lp : leaves) {
    const LeafSprite& leaf = bank.leaves[std::size_t(lp.index)];
    Bounds lb;
    for (const Point& corner : {Point{0, 0}, Point{double(leaf.raster.width()), 0},
                                Point{0, double(leaf.raster.height())},
                                Point{double(leaf.raster.width()), double(leaf.raster.height())}})
      lb.add(leaf_to_tree(leaf, lp, corner));
    const int x0 = std::max(0, int(std::floor(lb.min_x)) - ox);
    const int y0 = std::max(0, int(std::floor(lb.min_y)) - oy);
    const int x1 = std::min(width, int(std::ceil(lb.max_x)) - ox);
    const int y1 = std::min(height, int(std::ceil(lb.max_y)) - oy);
    const double inv = 1.0 / lp.scale;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const Point d{x + 0.5 + ox - lp.at.x, y + 0.5 + oy - lp.at.y};
        const Point local = rotate({d.x * inv, d.y * inv}, -lp.rotation);
        const double sx = std::floor(local.x + leaf.stem.x);
        const double sy = std::floor(local.y + leaf.stem.y);
        if (sx < 0 || sy < 0 || sx >= leaf.raster.width() || sy >= leaf.raster.height()) continue;
        blend_over(canvas.pixel(x, y), leaf.raster.pixel(int(sx), int(sy)));
      }
    }
  }

  tree.occluder_mask = alpha_mask(canvas, params.alpha_threshold);
  tree.raster = std::move(canvas);
  tree.base_anchor = {trunk.base.x - ox, trunk.base.y - oy};
  return tree;
}

}  // namespace foliage
