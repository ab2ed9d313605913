#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "foliage/geometry.hpp"

namespace foliage {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved 8-bit raster with a compile-time channel count, row-major.
template <int Channels>
class Image {
 public:
  static constexpr int kChannels = Channels;

  Image() = default;
  Image(int width, int height) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw ImageError("negative image dimensions");
    data_.assign(std::size_t(width) * std::size_t(height) * Channels, 0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  std::uint8_t* pixel(int x, int y) {
    return data_.data() + (std::size_t(y) * std::size_t(width_) + std::size_t(x)) * Channels;
  }
  const std::uint8_t* pixel(int x, int y) const {
    return data_.data() + (std::size_t(y) * std::size_t(width_) + std::size_t(x)) * Channels;
  }

  std::vector<std::uint8_t>& data() { return data_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

using RgbImage = Image<3>;
using RgbaImage = Image<4>;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Copies `rect` (must lie inside the image) into a new raster.
RgbImage crop(const RgbImage& image, const PixelRect& rect);

void fill_rect(RgbImage& image, const PixelRect& rect, Rgb color);

// PNG I/O. Readers accept gray, gray+alpha, palette, RGB and RGBA at any bit
// depth and convert to the requested layout.
RgbImage read_png_rgb(const std::filesystem::path& path);
RgbaImage read_png_rgba(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const RgbaImage& image);

}  // namespace foliage
