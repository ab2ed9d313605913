#include <algorithm>
#include <vector>

#include "foliage/kernels.hpp"

namespace foliage::kernels {

namespace {

// Below this many pixels the thread fork costs more than the loop.
constexpr std::size_t kParallelMinPixels = 1 << 14;

void fill_row(std::span<const Polygon> polygons, int r, std::uint8_t* out_row, int width,
              std::vector<double>& xs) {
  const double y = r + 0.5;
  for (const Polygon& poly : polygons) {
    xs.clear();
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point& p = poly[i];
      const Point& q = poly[j];
      if ((p.y > y) != (q.y > y)) xs.push_back(detail::edge_crossing_x(p, q, y));
    }
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    // Inside iff an odd number of crossings lie strictly right of the centre.
    std::size_t passed = 0;
    for (int c = 0; c < width; ++c) {
      const double px = c + 0.5;
      while (passed < xs.size() && xs[passed] <= px) ++passed;
      if ((xs.size() - passed) & 1U) out_row[c] = 1;
    }
  }
}

}  // namespace

void fill_polygons(std::span<const Polygon> polygons, BinaryMask& out) {
  const int height = out.height();
  const int width = out.width();
#pragma omp parallel if (out.size() >= kParallelMinPixels)
  {
    std::vector<double> xs;
#pragma omp for schedule(static)
    for (int r = 0; r < height; ++r) fill_row(polygons, r, out.row(r), width, xs);
  }
}

void and_not(const BinaryMask& base, const BinaryMask& occluder, BinaryMask& out) {
  const std::uint8_t* b = base.bits().data();
  const std::uint8_t* o = occluder.bits().data();
  std::uint8_t* d = out.bits().data();
  const std::int64_t n = std::int64_t(base.size());
#pragma omp parallel for schedule(static) if (base.size() >= kParallelMinPixels)
  for (std::int64_t i = 0; i < n; ++i) d[i] = b[i] & std::uint8_t(o[i] ^ 1U);
}

void or_into(BinaryMask& acc, const BinaryMask& other) {
  std::uint8_t* a = acc.bits().data();
  const std::uint8_t* o = other.bits().data();
  const std::int64_t n = std::int64_t(acc.size());
#pragma omp parallel for schedule(static) if (acc.size() >= kParallelMinPixels)
  for (std::int64_t i = 0; i < n; ++i) a[i] |= o[i];
}

std::int64_t popcount(const BinaryMask& m) {
  const std::uint8_t* b = m.bits().data();
  const std::int64_t n = std::int64_t(m.size());
  std::int64_t total = 0;
#pragma omp parallel for schedule(static) reduction(+ : total) if (m.size() >= kParallelMinPixels)
  for (std::int64_t i = 0; i < n; ++i) total += b[i];
  return total;
}

void composite_masked(RgbImage& dst, const RgbaImage& src, const BinaryMask& src_mask,
                      const SourceMapping& map, const PixelRect& window, BinaryMask& out_mask) {
  const int y_end = window.bottom();
  const int x_end = window.right();
#pragma omp parallel for schedule(static) if (window.area() >= std::int64_t(kParallelMinPixels))
  for (int r = window.y; r < y_end; ++r) {
    for (int c = window.x; c < x_end; ++c) {
      const Point s = map.apply(c + 0.5, r + 0.5);
      if (detail::composite_pixel(dst.pixel(c, r), src, src_mask, s)) out_mask.set(r, c);
    }
  }
}

}  // namespace foliage::kernels
