#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "foliage/coco_io.hpp"
#include "foliage/image.hpp"
#include "foliage/rng.hpp"

namespace fixture {

namespace fs = std::filesystem;
using namespace foliage;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "foliage-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline constexpr Rgb kRed{255, 0, 0};
inline constexpr Rgb kGreen{0, 160, 0};
inline constexpr Rgb kGray{128, 128, 128};

inline Polygon rect_polygon(const PixelRect& r) {
  return {{double(r.x), double(r.y)}, {double(r.right()), double(r.y)}, {double(r.right()), double(r.bottom())},
          {double(r.x), double(r.bottom())}};
}

inline Annotation person_annotation(std::int64_t id, std::int64_t image_id, const PixelRect& r) {
  Annotation a;
  a.id = id;
  a.image_id = image_id;
  a.category_id = 1;
  a.bbox = r.to_box();
  a.area = double(r.area());
  a.segmentation = std::vector<Polygon>{rect_polygon(r)};
  return a;
}

/// Textured background so compositing changes are visible in every channel.
inline RgbImage noise_image(int w, int h, std::uint64_t seed) {
  RgbImage im(w, h);
  Rng rng(seed);
  for (auto& b : im.data()) b = std::uint8_t(rng.uniform_int(0, 255));
  return im;
}

struct PersonScene {
  Dataset dataset;
  std::vector<RgbImage> images;
};

/// `n` images, each with 1-3 person rectangles (polygon segmentations) and
/// one non-person annotation, on noise backgrounds.
inline PersonScene person_scene(int n, int w, int h, std::uint64_t seed) {
  PersonScene s;
  s.dataset.categories = {Category{1, "person", nlohmann::json::object()}, Category{2, "dog", nlohmann::json::object()}};
  Rng rng(seed);
  std::int64_t ann_id = 1;
  for (int i = 0; i < n; ++i) {
    const std::int64_t id = i + 1;
    s.dataset.images.push_back(ImageRecord{id, "img_" + std::to_string(id) + ".png", w, h, nlohmann::json::object()});
    s.images.push_back(noise_image(w, h, rng.next()));
    const int persons = int(rng.uniform_int(1, 3));
    for (int p = 0; p < persons; ++p) {
      const int pw = int(rng.uniform_int(w / 10, w / 4));
      const int ph = int(rng.uniform_int(h / 4, h / 2));
      const PixelRect r{int(rng.uniform_int(0, w - pw)), int(rng.uniform_int(0, h - ph)), pw, ph};
      s.dataset.annotations.push_back(person_annotation(ann_id++, id, r));
    }
    Annotation dog = person_annotation(ann_id++, id, PixelRect{0, 0, 10, 10});
    dog.category_id = 2;
    s.dataset.annotations.push_back(dog);
  }
  return s;
}

inline void write_scene(const PersonScene& s, const fs::path& image_dir, const fs::path& dataset_path) {
  fs::create_directories(image_dir);
  for (std::size_t i = 0; i < s.images.size(); ++i) write_png(image_dir / s.dataset.images[i].file_name, s.images[i]);
  save_dataset(s.dataset, dataset_path.string());
}

/// Red-rectangle "persons" with known green occluders on a gray canvas.
///   image 1 (240x120): four 40x60 persons at x = 10, 70, 130, 190, y = 10
///     A: unoccluded                 mock score 1.0   L0
///     B: 20x30 corner occluded      mock score 0.75  L1
///     C: centred 30x40 hole         mock score 0.5   L2
///     D: only a 2-px ring visible   mock score 0.16  L3
///   image 2 (120x120): no persons; a solid 10x10 red square at (20,20) and a
///     10x10 red square with an 8x8 green hole at (80,20) (mock score 0.36).
struct ProtocolFixture {
  Dataset dataset;
  std::vector<RgbImage> images;
  std::vector<PixelRect> backgrounds;  // on image 2: solid blob, ring blob, empty
};

inline ProtocolFixture protocol_fixture() {
  ProtocolFixture f;
  f.dataset.categories = {Category{1, "person", nlohmann::json::object()}};
  f.dataset.images = {ImageRecord{1, "persons.png", 240, 120, nlohmann::json::object()}, ImageRecord{2, "background.png", 120, 120, nlohmann::json::object()}};

  RgbImage a(240, 120);
  fill_rect(a, PixelRect{0, 0, 240, 120}, kGray);
  const int xs[4] = {10, 70, 130, 190};
  const OcclusionLevel levels[4] = {OcclusionLevel::L0, OcclusionLevel::L1, OcclusionLevel::L2, OcclusionLevel::L3};
  for (int k = 0; k < 4; ++k) {
    const PixelRect r{xs[k], 10, 40, 60};
    fill_rect(a, r, kRed);
    Annotation ann = person_annotation(k + 1, 1, r);
    OcclusionAttributes attrs;
    attrs.level = levels[k];
    ann.attributes = attrs;
    f.dataset.annotations.push_back(ann);
  }
  fill_rect(a, PixelRect{70, 10, 20, 30}, kGreen);    // B: corner
  fill_rect(a, PixelRect{135, 20, 30, 40}, kGreen);   // C: hole
  fill_rect(a, PixelRect{192, 12, 36, 56}, kGreen);   // D: ring
  f.images.push_back(std::move(a));

  RgbImage b(120, 120);
  fill_rect(b, PixelRect{0, 0, 120, 120}, kGray);
  fill_rect(b, PixelRect{20, 20, 10, 10}, kRed);
  fill_rect(b, PixelRect{80, 20, 10, 10}, kRed);
  fill_rect(b, PixelRect{81, 21, 8, 8}, kGreen);
  f.images.push_back(std::move(b));
  f.backgrounds = {PixelRect{0, 0, 60, 60}, PixelRect{60, 0, 60, 60}, PixelRect{0, 60, 120, 60}};
  return f;
}

}  // namespace fixture
