#pragma once

// Data-parallel inner loops. Every kernel has two implementations with the
// same signature: `kernels::` (OpenMP over rows or pixels) and `reference::`
// (plain serial loops). Library code calls `kernels::`; tests assert both
// produce identical bytes and bench/ times them against each other.

#include <cstdint>
#include <span>

#include "foliage/geometry.hpp"
#include "foliage/image.hpp"
#include "foliage/mask.hpp"

namespace foliage {

/// Inverse affine map from destination pixel centers to source coordinates:
///   src.x = a*qx + b*qy + tx,   src.y = c*qx + d*qy + ty
struct SourceMapping {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
  double tx = 0.0, ty = 0.0;

  Point apply(double qx, double qy) const { return {a * qx + b * qy + tx, c * qx + d * qy + ty}; }
};

namespace kernels {

/// Even-odd fill per polygon at pixel centers, OR across polygons.
void fill_polygons(std::span<const Polygon> polygons, BinaryMask& out);

void and_not(const BinaryMask& base, const BinaryMask& occluder, BinaryMask& out);
void or_into(BinaryMask& acc, const BinaryMask& other);
std::int64_t popcount(const BinaryMask& m);

/// For each destination pixel inside `window`: the source mask is sampled
/// nearest-neighbour; where it is set, the source colour is sampled bilinearly
/// (premultiplied) and composited source-over onto `dst`, and the pixel is set
/// in `out_mask`. Other pixels are left untouched.
void composite_masked(RgbImage& dst, const RgbaImage& src, const BinaryMask& src_mask,
                      const SourceMapping& map, const PixelRect& window, BinaryMask& out_mask);

}  // namespace kernels

namespace reference {

void fill_polygons(std::span<const Polygon> polygons, BinaryMask& out);
void and_not(const BinaryMask& base, const BinaryMask& occluder, BinaryMask& out);
void or_into(BinaryMask& acc, const BinaryMask& other);
std::int64_t popcount(const BinaryMask& m);
void composite_masked(RgbImage& dst, const RgbaImage& src, const BinaryMask& src_mask,
                      const SourceMapping& map, const PixelRect& window, BinaryMask& out_mask);

}  // namespace reference

namespace detail {

/// Shared per-pixel helpers so both kernel flavours compute bit-identical values.

/// x-coordinate where edge (p, q) crosses the horizontal line y; callers
/// guarantee (p.y > y) != (q.y > y).
inline double edge_crossing_x(const Point& p, const Point& q, double y) {
  return (q.x - p.x) * (y - p.y) / (q.y - p.y) + p.x;
}

/// Composites one destination pixel. Returns false when the source mask is
/// unset at the nearest source pixel.
bool composite_pixel(std::uint8_t* dst_px, const RgbaImage& src, const BinaryMask& src_mask,
                     const Point& s);

}  // namespace detail

}  // namespace foliage
