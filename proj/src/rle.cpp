#include <cmath>
#include <cstdint>

#include "foliage/coco_io.hpp"
#include "foliage/kernels.hpp"

namespace foliage {

RleCounts mask_to_rle(const BinaryMask& m) {
  RleCounts out{m.height(), m.width(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int c = 0; c < m.width(); ++c) {
    for (int r = 0; r < m.height(); ++r) {
      const std::uint8_t v = m.get(r, c) ? 1 : 0;
      if (v != current) {
        out.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  out.counts.push_back(run);
  return out;
}

BinaryMask rle_to_mask(const RleCounts& r) {
  if (r.height < 0 || r.width < 0) throw RleError("negative RLE size");
  std::uint64_t total = 0;
  for (std::uint32_t c : r.counts) total += c;
  const std::uint64_t expected = std::uint64_t(r.height) * std::uint64_t(r.width);
  if (total != expected)
    throw RleError("RLE counts sum to " + std::to_string(total) + ", expected " + std::to_string(expected));

  BinaryMask m(r.width, r.height);
  std::uint64_t pos = 0;
  bool value = false;
  for (std::uint32_t run : r.counts) {
    if (value) {
      for (std::uint64_t k = pos; k < pos + run; ++k) {
        const int col = int(k / std::uint64_t(r.height));
        const int row = int(k % std::uint64_t(r.height));
        m.set(row, col);
      }
    }
    pos += run;
    value = !value;
  }
  return m;
}

// Compressed COCO counts. Each count from index 3 on is stored as the
// difference to the count two places earlier (the reference implementation
// tests `i > 2`); values are then split into 5-bit groups, least significant
// first, with 0x20 marking continuation and 0x10 in the last group carrying
// the sign. Every group is offset by 48 to land in printable ASCII.
std::string rle_encode_string(const RleCounts& r) {
  std::string s;
  const auto& cnts = r.counts;
  for (std::size_t i = 0; i < cnts.size(); ++i) {
    std::int64_t x = cnts[i];
    if (i > 2) x -= std::int64_t(cnts[i - 2]);
    bool more = true;
    while (more) {
      int c = int(x & 0x1f);
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      s.push_back(char(c + 48));
    }
  }
  return s;
}

RleCounts rle_decode_string(std::string_view s, int height, int width) {
  RleCounts out{height, width, {}};
  std::size_t p = 0;
  while (p < s.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw RleError("truncated RLE string");
      const int ch = static_cast<unsigned char>(s[p]);
      const int c = ch - 48;
      if (c < 0 || c > 0x3f) throw RleError("invalid character in RLE string at offset " + std::to_string(p));
      if (5 * k >= 64) throw RleError("RLE value too long at offset " + std::to_string(p));
      x |= std::int64_t(std::uint64_t(c & 0x1f) << (5 * k));
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10) && 5 * k < 64) x |= std::int64_t(~std::uint64_t(0) << (5 * k));
    }
    const std::size_t m = out.counts.size();
    if (m > 2) x += std::int64_t(out.counts[m - 2]);
    if (x < 0 || x > std::int64_t(UINT32_MAX))
      throw RleError("RLE count out of range at index " + std::to_string(m));
    out.counts.push_back(std::uint32_t(x));
  }
  std::uint64_t total = 0;
  for (std::uint32_t c : out.counts) total += c;
  if (!out.counts.empty() && total != std::uint64_t(height) * std::uint64_t(width))
    throw RleError("decoded RLE counts sum to " + std::to_string(total) + ", expected " +
                   std::to_string(std::uint64_t(height) * std::uint64_t(width)));
  return out;
}

BinaryMask polygon_to_mask(std::span<const Polygon> polygons, int width, int height) {
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    if (polygons[i].size() < 3)
      throw MaskError("polygon " + std::to_string(i) + " has " + std::to_string(polygons[i].size()) +
                      " vertices, need at least 3");
    for (const Point& p : polygons[i])
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw MaskError("non-finite polygon coordinate");
  }
  BinaryMask m(width, height);
  kernels::fill_polygons(polygons, m);
  return m;
}

std::optional<BinaryMask> segmentation_to_mask(const Segmentation& s, int width, int height) {
  auto check_size = [&](int h, int w) {
    if (h != height || w != width)
      throw RleError("RLE size [" + std::to_string(h) + "," + std::to_string(w) + "] does not match image " +
                     std::to_string(height) + "x" + std::to_string(width));
  };
  if (const auto* polys = std::get_if<std::vector<Polygon>>(&s)) {
    if (polys->empty()) return std::nullopt;
    return polygon_to_mask(*polys, width, height);
  }
  if (const auto* rle = std::get_if<RleCounts>(&s)) {
    check_size(rle->height, rle->width);
    return rle_to_mask(*rle);
  }
  if (const auto* c = std::get_if<CompressedRle>(&s)) {
    check_size(c->height, c->width);
    return rle_to_mask(rle_decode_string(c->counts, c->height, c->width));
  }
  return std::nullopt;
}

}  // namespace foliage
