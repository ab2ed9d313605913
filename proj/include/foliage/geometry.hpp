#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace foliage {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

using Polygon = std::vector<Point>;

/// Axis-aligned box in continuous pixel coordinates, top-left origin.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Rectangle on the integer pixel grid covering columns [x, x+w) and rows [y, y+h).
struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  std::int64_t area() const { return std::int64_t{w} * h; }
  bool empty() const { return w <= 0 || h <= 0; }

  bool contains(const PixelRect& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }

  Box to_box() const { return Box{double(x), double(y), double(w), double(h)}; }

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// True when the two rectangles share positive area. Touching edges do not intersect.
inline bool intersects(const PixelRect& a, const PixelRect& b) {
  return a.x < b.right() && b.x < a.right() && a.y < b.bottom() && b.y < a.bottom();
}

inline std::int64_t intersection_area(const PixelRect& a, const PixelRect& b) {
  const int w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const int h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (w <= 0 || h <= 0) return 0;
  return std::int64_t{w} * h;
}

/// Smallest pixel rectangle covering `b`, clipped to a width x height image.
PixelRect enclosing_pixel_rect(const Box& b, int width, int height);

}  // namespace foliage
