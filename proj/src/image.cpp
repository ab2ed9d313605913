#include "foliage/image.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

namespace foliage {

PixelRect enclosing_pixel_rect(const Box& b, int width, int height) {
  const int x0 = std::clamp(int(std::floor(b.x)), 0, width);
  const int y0 = std::clamp(int(std::floor(b.y)), 0, height);
  const int x1 = std::clamp(int(std::ceil(b.right())), 0, width);
  const int y1 = std::clamp(int(std::ceil(b.bottom())), 0, height);
  return PixelRect{x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

RgbImage crop(const RgbImage& image, const PixelRect& rect) {
  if (rect.x < 0 || rect.y < 0 || rect.w < 0 || rect.h < 0 || rect.right() > image.width() ||
      rect.bottom() > image.height())
    throw ImageError("crop rectangle outside image");
  RgbImage out(rect.w, rect.h);
  for (int r = 0; r < rect.h; ++r) {
    const std::uint8_t* src = image.pixel(rect.x, rect.y + r);
    std::copy(src, src + std::size_t(rect.w) * 3, out.pixel(0, r));
  }
  return out;
}

void fill_rect(RgbImage& image, const PixelRect& rect, Rgb color) {
  const int x0 = std::max(rect.x, 0);
  const int y0 = std::max(rect.y, 0);
  const int x1 = std::min(rect.right(), image.width());
  const int y1 = std::min(rect.bottom(), image.height());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      std::uint8_t* p = image.pixel(x, y);
      p[0] = color.r;
      p[1] = color.g;
      p[2] = color.b;
    }
  }
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// Decodes into 8-bit RGBA; conversion to RGB happens afterwards.
RgbaImage read_png_impl(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw ImageError("not a PNG file: " + path.string());

  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  if (!png) throw ImageError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageError("png_create_info_struct failed");
  }

  RgbaImage out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("PNG decode error in " + path.string() + ": " + error);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (!(color & PNG_COLOR_MASK_ALPHA) && !png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
  png_read_update_info(png, info);

  out = RgbaImage(int(w), int(h));
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.pixel(0, int(y));
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

template <int Channels>
void write_png_impl(const std::filesystem::path& path, const Image<Channels>& image) {
  if (image.empty()) throw ImageError("cannot write empty image " + path.string());
  FilePtr f = open_file(path, "wb");

  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  if (!png) throw ImageError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageError("png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(std::size_t(image.height()));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("PNG encode error in " + path.string() + ": " + error);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(image.width()), png_uint_32(image.height()), 8,
               Channels == 4 ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y) rows[std::size_t(y)] = const_cast<png_bytep>(image.pixel(0, y));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RgbaImage read_png_rgba(const std::filesystem::path& path) { return read_png_impl(path); }

RgbImage read_png_rgb(const std::filesystem::path& path) {
  const RgbaImage rgba = read_png_impl(path);
  RgbImage out(rgba.width(), rgba.height());
  const std::size_t n = std::size_t(rgba.width()) * std::size_t(rgba.height());
  const std::uint8_t* s = rgba.data().data();
  std::uint8_t* d = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    d[3 * i + 0] = s[4 * i + 0];
    d[3 * i + 1] = s[4 * i + 1];
    d[3 * i + 2] = s[4 * i + 2];
  }
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) { write_png_impl(path, image); }
void write_png(const std::filesystem::path& path, const RgbaImage& image) { write_png_impl(path, image); }

}  // namespace foliage
