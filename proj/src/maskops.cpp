#include "foliage/maskops.hpp"

#include <algorithm>
#include <cmath>

#include "foliage/kernels.hpp"

namespace foliage {

std::int64_t BinaryMask::area() const { return kernels::popcount(*this); }

std::string level_name(OcclusionLevel l) { return "L" + std::to_string(level_index(l)); }

OcclusionLevel level_from_index(int i) {
  if (i < 0 || i > 3) throw std::out_of_range("occlusion level must be 0..3, got " + std::to_string(i));
  return static_cast<OcclusionLevel>(i);
}

void LevelThresholds::validate() const {
  if (!(0.0 < t1 && t1 < t2 && t2 < t3 && t3 < 1.0))
    throw std::invalid_argument("level thresholds must satisfy 0 < t1 < t2 < t3 < 1");
}

BinaryMask mask_and_not(const BinaryMask& base, const BinaryMask& occluder) {
  if (!base.same_shape(occluder)) throw MaskError("mask_and_not: dimension mismatch");
  BinaryMask out(base.width(), base.height());
  kernels::and_not(base, occluder, out);
  return out;
}

BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw MaskError("mask_or: dimension mismatch");
  BinaryMask out = a;
  kernels::or_into(out, b);
  return out;
}

double visible_fraction(const BinaryMask& original, const BinaryMask& occluded) {
  if (!original.same_shape(occluded)) throw MaskError("visible_fraction: dimension mismatch");
  const std::int64_t total = original.area();
  if (total == 0) throw MaskError("visible_fraction: original mask is empty");
  const auto& o = original.bits();
  const auto& v = occluded.bits();
  for (std::size_t i = 0; i < o.size(); ++i)
    if (v[i] && !o[i]) throw MaskError("visible_fraction: occluded mask is not a subset of original");
  return double(occluded.area()) / double(total);
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::optional<Box> bbox_of_mask(const BinaryMask& m) {
  int min_r = m.height(), max_r = -1, min_c = m.width(), max_c = -1;
  for (int r = 0; r < m.height(); ++r) {
    const std::uint8_t* row = m.row(r);
    const std::uint8_t* first = std::find(row, row + m.width(), 1);
    if (first == row + m.width()) continue;
    const int last = int(std::find(std::make_reverse_iterator(row + m.width()), std::make_reverse_iterator(row), 1)
                             .base() - row) - 1;
    min_r = std::min(min_r, r);
    max_r = r;
    min_c = std::min(min_c, int(first - row));
    max_c = std::max(max_c, last);
  }
  if (max_r < 0) return std::nullopt;
  return Box{double(min_c), double(min_r), double(max_c - min_c + 1), double(max_r - min_r + 1)};
}

OcclusionLevel classify_occlusion(double f, const LevelThresholds& th) {
  if (f < th.t1) return OcclusionLevel::L0;
  if (f < th.t2) return OcclusionLevel::L1;
  if (f < th.t3) return OcclusionLevel::L2;
  return OcclusionLevel::L3;
}

}  // namespace foliage
