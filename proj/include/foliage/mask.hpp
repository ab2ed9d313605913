#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace foliage {

class MaskError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Binary raster, one byte per pixel (0 or 1), row-major.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw MaskError("negative mask dimensions");
    bits_.assign(std::size_t(width) * std::size_t(height), 0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool get(int row, int col) const { return bits_[index(row, col)] != 0; }
  void set(int row, int col, bool value = true) { bits_[index(row, col)] = value ? 1 : 0; }

  std::uint8_t* row(int r) { return bits_.data() + std::size_t(r) * std::size_t(width_); }
  const std::uint8_t* row(int r) const { return bits_.data() + std::size_t(r) * std::size_t(width_); }

  std::vector<std::uint8_t>& bits() { return bits_; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  /// Number of set pixels.
  std::int64_t area() const;

  bool same_shape(const BinaryMask& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int row, int col) const { return std::size_t(row) * std::size_t(width_) + std::size_t(col); }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace foliage
