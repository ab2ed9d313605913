#include <algorithm>
#include <vector>

#include "foliage/kernels.hpp"

namespace foliage::reference {

void fill_polygons(std::span<const Polygon> polygons, BinaryMask& out) {
  std::vector<double> xs;
  for (const Polygon& poly : polygons) {
    const std::size_t n = poly.size();
    for (int r = 0; r < out.height(); ++r) {
      const double y = r + 0.5;
      xs.clear();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((poly[i].y > y) != (poly[j].y > y)) xs.push_back(detail::edge_crossing_x(poly[i], poly[j], y));
      }
      std::sort(xs.begin(), xs.end());
      for (int c = 0; c < out.width(); ++c) {
        const double px = c + 0.5;
        const auto right = xs.end() - std::upper_bound(xs.begin(), xs.end(), px);
        if (right % 2 == 1) out.set(r, c);
      }
    }
  }
}

void and_not(const BinaryMask& base, const BinaryMask& occluder, BinaryMask& out) {
  for (int r = 0; r < base.height(); ++r)
    for (int c = 0; c < base.width(); ++c) out.set(r, c, base.get(r, c) && !occluder.get(r, c));
}

void or_into(BinaryMask& acc, const BinaryMask& other) {
  for (int r = 0; r < acc.height(); ++r)
    for (int c = 0; c < acc.width(); ++c)
      if (other.get(r, c)) acc.set(r, c);
}

std::int64_t popcount(const BinaryMask& m) {
  std::int64_t total = 0;
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) total += m.get(r, c) ? 1 : 0;
  return total;
}

void composite_masked(RgbImage& dst, const RgbaImage& src, const BinaryMask& src_mask,
                      const SourceMapping& map, const PixelRect& window, BinaryMask& out_mask) {
  for (int r = window.y; r < window.bottom(); ++r) {
    for (int c = window.x; c < window.right(); ++c) {
      const Point s = map.apply(c + 0.5, r + 0.5);
      if (detail::composite_pixel(dst.pixel(c, r), src, src_mask, s)) out_mask.set(r, c);
    }
  }
}

}  // namespace foliage::reference
