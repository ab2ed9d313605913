#include "doctest.h"

#include "fixtures.hpp"

#include "foliage/augment.hpp"

using namespace foliage;
using fixture::person_annotation;

namespace {

/// One fully opaque 10x10 trunk, no branches: a tree is then a solid square.
AssetBank block_bank() {
  AssetBank bank;
  TrunkSprite t;
  t.raster = RgbaImage(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      std::uint8_t* p = t.raster.pixel(x, y);
      p[0] = 10;
      p[1] = 200;
      p[2] = 30;
      p[3] = 255;
    }
  t.base = {5, 10};
  t.spine_bottom = {5, 10};
  t.spine_top = {5, 0};
  bank.trunks.push_back(t);
  LeafSprite l;
  l.raster = RgbaImage(3, 3);
  l.stem = {1, 1};
  bank.leaves.push_back(l);
  return bank;
}

AugmentConfig block_config() {
  AugmentConfig cfg;
  cfg.trees_per_image = {1, 1};
  cfg.rotation_deg = {0, 0};
  cfg.height_factor = {1, 1};
  cfg.tree_params.branch_count = {0, 0};
  return cfg;
}

TreeInstance solid_tree(int w, int h, std::uint8_t alpha) {
  TreeInstance t;
  t.raster = RgbaImage(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t* p = t.raster.pixel(x, y);
      p[0] = 1;
      p[1] = 2;
      p[2] = 3;
      p[3] = alpha;
    }
  t.occluder_mask = alpha_mask(t.raster, 128);
  t.base_anchor = {w / 2.0, double(h)};
  return t;
}

Dataset three_images() {
  Dataset d;
  d.categories = {Category{1, "person", nlohmann::json::object()}, Category{2, "dog", nlohmann::json::object()}};
  for (int i = 1; i <= 3; ++i) d.images.push_back(ImageRecord{i, "i" + std::to_string(i) + ".png", 50, 40, nlohmann::json::object()});
  d.annotations.push_back(person_annotation(1, 1, {1, 1, 5, 5}));
  Annotation dog = person_annotation(2, 2, {1, 1, 5, 5});
  dog.category_id = 2;
  d.annotations.push_back(dog);
  d.annotations.push_back(person_annotation(3, 3, {1, 1, 5, 5}));
  d.annotations.push_back(dog);
  d.annotations.back().id = 4;
  d.annotations.back().image_id = 3;
  return d;
}

}  // namespace

TEST_SUITE("augment") {
  TEST_CASE("filter_person_images") {
    const Dataset d = three_images();
    const Dataset f = filter_person_images(d, "person");
    REQUIRE(f.images.size() == 2);
    CHECK(f.images[0].id == 1);
    CHECK(f.images[1].id == 3);
    CHECK(f.annotations.size() == 3);  // image 3 keeps its dog
    CHECK(filter_person_images(f, "person") == f);
    CHECK_THROWS_AS(filter_person_images(d, "cat"), DatasetError);

    Dataset none = d;
    none.annotations.clear();
    CHECK(filter_person_images(none, "person").images.empty());
  }

  TEST_CASE("place_tree") {
    const TreeInstance tall = solid_tree(10, 960, 255);
    AugmentConfig cfg;
    cfg.rotation_deg = {0, 0};
    cfg.height_factor = {1, 1};
    const Placement p = place_tree(tall, 640, 480, cfg, 3);
    CHECK(p.angle_deg == 0.0);
    CHECK(p.scale == 0.5);
    CHECK(p.x >= 0.0);
    CHECK(p.x < 640.0);
    CHECK(place_tree(tall, 640, 480, AugmentConfig{}, 9) == place_tree(tall, 640, 480, AugmentConfig{}, 9));
    CHECK_FALSE(place_tree(tall, 640, 480, AugmentConfig{}, 9) == place_tree(tall, 640, 480, AugmentConfig{}, 10));
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Placement q = place_tree(tall, 640, 480, AugmentConfig{}, s);
      CHECK(q.angle_deg >= -20.0);
      CHECK(q.angle_deg <= 20.0);
      CHECK(q.scale * 960 >= 0.9 * 480 - 1e-9);
      CHECK(q.scale * 960 <= 1.2 * 480 + 1e-9);
    }
  }

  TEST_CASE("composite: transparent tree changes nothing") {
    const RgbImage im = fixture::noise_image(60, 40, 1);
    const Composited c = composite(im, solid_tree(10, 10, 0), Placement{30, 0, 1});
    CHECK(c.image.data() == im.data());
    CHECK(c.occluder.area() == 0);
  }

  TEST_CASE("composite: opaque 10x10 tree replaces exactly 100 pixels") {
    RgbImage im(100, 100);
    fill_rect(im, {0, 0, 100, 100}, Rgb{200, 200, 200});
    const Composited c = composite(im, solid_tree(10, 10, 255), Placement{50, 0, 1});
    CHECK(c.occluder.area() == 100);
    int changed = 0;
    for (int y = 0; y < 100; ++y)
      for (int x = 0; x < 100; ++x) {
        const bool inside = x >= 45 && x < 55 && y >= 90;
        const std::uint8_t* p = c.image.pixel(x, y);
        if (p[0] != 200 || p[1] != 200 || p[2] != 200) ++changed;
        CHECK(c.occluder.get(y, x) == inside);
        if (inside) CHECK((p[0] == 1 && p[1] == 2 && p[2] == 3));
      }
    CHECK(changed == 100);
  }

  TEST_CASE("composite: tree at the right edge is clipped") {
    const RgbImage im = fixture::noise_image(60, 40, 2);
    const Composited c = composite(im, solid_tree(10, 10, 255), Placement{59, 0, 1});
    CHECK(c.occluder.area() == 6 * 10);
    const Composited rotated = composite(im, solid_tree(10, 30, 255), Placement{59, 20, 2});
    CHECK(rotated.occluder.area() > 0);
    CHECK(rotated.occluder.width() == 60);
  }

  TEST_CASE("augment_image: zero trees leaves everything unchanged") {
    const fixture::PersonScene s = fixture::person_scene(1, 80, 60, 4);
    AugmentConfig cfg;
    cfg.trees_per_image = {0, 0};
    const AugmentedImage out =
        augment_image(s.images[0], 1, s.dataset.annotations, 1, synthesize_assets(1), cfg, 77);
    CHECK(out.image.data() == s.images[0].data());
    CHECK(out.tree_count == 0);
    for (std::size_t i = 0; i < out.annotations.size(); ++i) {
      const Annotation& a = out.annotations[i];
      if (a.category_id != 1) {
        CHECK(a == s.dataset.annotations[i]);
        continue;
      }
      REQUIRE(a.attributes);
      CHECK(a.attributes->level == OcclusionLevel::L0);
      CHECK(a.attributes->visible_fraction == 1.0);
      CHECK(a.attributes->fully_occluded == false);
      CHECK(a.bbox == s.dataset.annotations[i].bbox);
      CHECK(*segmentation_to_mask(a.segmentation, 80, 60) ==
            *segmentation_to_mask(s.dataset.annotations[i].segmentation, 80, 60));
    }
  }

  TEST_CASE("augment_image: half-covered and fully covered persons") {
    const AssetBank bank = block_bank();
    const AugmentConfig cfg = block_config();
    RgbImage im(60, 14);
    fill_rect(im, {0, 0, 60, 14}, Rgb{50, 50, 50});

    // Find a seed whose block lands with room on its right for the test person.
    std::uint64_t seed = 0;
    PixelRect block;
    for (;; ++seed) {
      const AugmentedImage probe = augment_image(im, 1, {}, 1, bank, cfg, seed);
      const auto bb = bbox_of_mask(probe.occluder);
      REQUIRE(bb);
      block = PixelRect{int(bb->x), int(bb->y), int(bb->w), int(bb->h)};
      if (block.right() + 5 <= 60 && block.w == 10) break;
    }
    CHECK(block.h == 10);
    CHECK(block.bottom() == 14);

    const std::vector<Annotation> anns{person_annotation(1, 1, {block.x + 5, block.y, 10, 10}),
                                       person_annotation(2, 1, block)};
    const AugmentedImage out = augment_image(im, 1, anns, 1, bank, cfg, seed);
    const Annotation& half = out.annotations[0];
    REQUIRE(half.attributes);
    CHECK(half.attributes->visible_fraction == 0.5);
    CHECK(half.attributes->level == OcclusionLevel::L2);
    CHECK(half.attributes->fully_occluded == false);
    CHECK(half.area == 50);
    CHECK(half.bbox == Box{double(block.right()), double(block.y), 5, 10});
    CHECK(std::holds_alternative<CompressedRle>(half.segmentation));

    const Annotation& gone = out.annotations[1];
    REQUIRE(gone.attributes);
    CHECK(gone.attributes->visible_fraction == 0.0);
    CHECK(gone.attributes->fully_occluded == true);
    CHECK(gone.attributes->level == OcclusionLevel::L3);
    CHECK(gone.bbox == Box{0, 0, 0, 0});
    CHECK(gone.area == 0);
  }

  TEST_CASE("augment_image: annotation without segmentation is reported and passed through") {
    const fixture::PersonScene s = fixture::person_scene(1, 80, 60, 5);
    Annotation bare = person_annotation(99, 1, {2, 2, 5, 5});
    bare.segmentation = std::monostate{};
    const std::vector<Annotation> anns{bare};
    const AugmentedImage out = augment_image(s.images[0], 1, anns, 1, synthesize_assets(1), AugmentConfig{}, 3);
    REQUIRE(out.issues.size() == 1);
    CHECK(out.issues[0].annotation_id == 99);
    CHECK(out.annotations[0] == bare);
  }

  TEST_CASE("augment_image: existing attribute members survive") {
    const fixture::PersonScene s = fixture::person_scene(1, 80, 60, 6);
    Annotation a = s.dataset.annotations[0];
    a.extra["attributes"] = {{"pose", "standing"}};
    const std::vector<Annotation> anns{a};
    const AugmentedImage out = augment_image(s.images[0], 1, anns, 1, synthesize_assets(1), AugmentConfig{}, 3);
    REQUIRE(out.annotations[0].attributes);
    CHECK(out.annotations[0].attributes->extra["pose"] == "standing");
    CHECK_FALSE(out.annotations[0].extra.contains("attributes"));
  }

  TEST_CASE("augment_dataset: empty dataset gives valid empty outputs") {
    fixture::TempDir dir;
    AugmentConfig cfg;
    const AugmentReport rep = augment_dataset(Dataset{}, synthesize_assets(1), cfg, dir / "in", dir / "out");
    CHECK(rep.images_processed == 0);
    const Dataset back = load_dataset((dir / "out" / "annotations.json").string());
    CHECK(back.images.empty());
    CHECK(back.annotations.empty());
    CHECK(nlohmann::json::parse(fixture::read_file(dir / "out" / "report.json"))["images_processed"] == 0);
  }

  TEST_CASE("augment_dataset: outputs, report consistency and worker independence") {
    fixture::TempDir dir;
    fixture::PersonScene s = fixture::person_scene(6, 96, 72, 8);
    s.dataset.images.push_back(ImageRecord{100, "nopeople.png", 96, 72, nlohmann::json::object()});
    s.images.push_back(fixture::noise_image(96, 72, 1));
    s.dataset.images.push_back(ImageRecord{101, "missing.png", 96, 72, nlohmann::json::object()});
    s.dataset.annotations.push_back(person_annotation(1000, 101, {1, 1, 10, 10}));
    fixture::write_scene(s, dir / "images", dir / "d.json");
    std::filesystem::remove(dir / "images" / "missing.png");

    AugmentConfig cfg;
    cfg.master_seed = 1234;
    const AssetBank bank = synthesize_assets(2);
    const AugmentReport r1 = augment_dataset(s.dataset, bank, cfg, dir / "images", dir / "out1", 1);
    const AugmentReport r3 = augment_dataset(s.dataset, bank, cfg, dir / "images", dir / "out3", 3);
    CHECK(r1.images_processed == 6);
    CHECK(r1.images_skipped_no_person == 1);
    CHECK(r1.images_failed == 1);
    REQUIRE_FALSE(r1.issues.empty());
    CHECK(r1.issues.back().image_id == 101);

    CHECK(fixture::read_file(dir / "out1" / "annotations.json") == fixture::read_file(dir / "out3" / "annotations.json"));
    CHECK(fixture::read_file(dir / "out1" / "report.json") == fixture::read_file(dir / "out3" / "report.json"));
    for (int i = 1; i <= 6; ++i) {
      const std::string name = "img_" + std::to_string(i) + ".png";
      CHECK(fixture::read_file(dir / "out1" / "images" / name) == fixture::read_file(dir / "out3" / "images" / name));
    }

    const Dataset out = load_dataset((dir / "out1" / "annotations.json").string());
    CHECK(out.images.size() == 6);
    std::array<std::int64_t, 4> recount{};
    std::int64_t persons = 0;
    for (const Annotation& a : out.annotations) {
      if (a.category_id != 1) continue;
      REQUIRE(a.attributes);
      REQUIRE(a.attributes->visible_fraction);
      CHECK(a.attributes->level == classify_occlusion(1.0 - *a.attributes->visible_fraction, cfg.thresholds));
      ++recount[std::size_t(level_index(a.attributes->level))];
      ++persons;
    }
    CHECK(recount == r1.level_counts);
    const auto rep = nlohmann::json::parse(fixture::read_file(dir / "out1" / "report.json"));
    CHECK(rep["person_annotations"] == persons);
    CHECK(rep["image_seeds"].size() == 7);
  }

  TEST_CASE("config validation") {
    AugmentConfig cfg;
    cfg.rotation_deg = {-10, 20};
    CHECK_THROWS(cfg.validate());
    cfg = AugmentConfig{};
    cfg.trees_per_image = {3, 1};
    CHECK_THROWS(cfg.validate());
    cfg = AugmentConfig{};
    cfg.height_factor = {0, 1};
    CHECK_THROWS(cfg.validate());
  }
}
