#include <algorithm>
#include <cmath>

#include "foliage/kernels.hpp"

namespace foliage::detail {

bool composite_pixel(std::uint8_t* dst_px, const RgbaImage& src, const BinaryMask& src_mask,
                     const Point& s) {
  const double nx = std::floor(s.x);
  const double ny = std::floor(s.y);
  if (nx < 0 || ny < 0 || nx >= src.width() || ny >= src.height()) return false;
  if (!src_mask.get(int(ny), int(nx))) return false;

  // Bilinear over texel centres, premultiplied, transparent outside the raster.
  const double fx = s.x - 0.5;
  const double fy = s.y - 0.5;
  const int x0 = int(std::floor(fx));
  const int y0 = int(std::floor(fy));
  const double tx = fx - x0;
  const double ty = fy - y0;

  double alpha = 0.0;
  double premul[3] = {0.0, 0.0, 0.0};
  for (int dy = 0; dy < 2; ++dy) {
    const int y = y0 + dy;
    const double wy = dy ? ty : 1.0 - ty;
    if (y < 0 || y >= src.height() || wy == 0.0) continue;
    for (int dx = 0; dx < 2; ++dx) {
      const int x = x0 + dx;
      const double wx = dx ? tx : 1.0 - tx;
      if (x < 0 || x >= src.width() || wx == 0.0) continue;
      const std::uint8_t* p = src.pixel(x, y);
      const double wa = wx * wy * p[3];
      alpha += wa;
      for (int ch = 0; ch < 3; ++ch) premul[ch] += wa * p[ch];
    }
  }

  const double keep = 1.0 - alpha / 255.0;
  for (int ch = 0; ch < 3; ++ch) {
    const double v = premul[ch] / 255.0 + dst_px[ch] * keep;
    dst_px[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return true;
}

}  // namespace foliage::detail
