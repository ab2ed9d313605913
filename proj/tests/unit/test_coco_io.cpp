#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"

#include "foliage/coco_io.hpp"

using namespace foliage;
using nlohmann::json;

namespace {

const char* kSample = R"({
  "info": {"description": "sample"},
  "licenses": [],
  "images": [{"id": 1, "file_name": "a.png", "width": 8, "height": 6, "license": 3}],
  "categories": [{"id": 1, "name": "person", "supercategory": "human"}],
  "annotations": [
    {"id": 10, "image_id": 1, "category_id": 1, "bbox": [0, 0, 4, 4], "area": 16, "iscrowd": 0,
     "segmentation": [[0, 0, 4, 0, 4, 4, 0, 4]], "note": "kept"},
    {"id": 11, "image_id": 1, "category_id": 1, "bbox": [1, 1, 2, 2], "area": 4, "iscrowd": 1,
     "segmentation": {"size": [6, 8], "counts": [7, 2, 4, 2, 33]},
     "attributes": {"occlusion_level": 2, "visible_fraction": 0.5, "fully_occluded": false, "source": "x"}}
  ]
})";

}  // namespace

TEST_SUITE("coco_io") {
  TEST_CASE("empty arrays parse to an empty dataset and serialize back") {
    const Dataset d = parse_dataset(R"({"images": [], "annotations": [], "categories": []})");
    CHECK(d.images.empty());
    CHECK(d.annotations.empty());
    CHECK(d.categories.empty());
    const json j = json::parse(serialize_dataset(Dataset{}));
    CHECK(j == json{{"annotations", json::array()}, {"categories", json::array()}, {"images", json::array()}});
  }

  TEST_CASE("parse keeps every field and unknown keys") {
    const Dataset d = parse_dataset(kSample);
    REQUIRE(d.annotations.size() == 2);
    CHECK(d.extra.contains("info"));
    CHECK(d.images[0].extra["license"] == 3);
    CHECK(d.annotations[0].extra["note"] == "kept");
    CHECK(std::holds_alternative<std::vector<Polygon>>(d.annotations[0].segmentation));
    CHECK(std::holds_alternative<RleCounts>(d.annotations[1].segmentation));
    CHECK(d.annotations[1].iscrowd);
    REQUIRE(d.annotations[1].attributes);
    CHECK(d.annotations[1].attributes->level == OcclusionLevel::L2);
    CHECK(d.annotations[1].attributes->visible_fraction == 0.5);
    CHECK(d.annotations[1].attributes->extra["source"] == "x");
  }

  TEST_CASE("serialize/parse round trip is exact and byte-stable") {
    const Dataset d = parse_dataset(kSample);
    const std::string s1 = serialize_dataset(d);
    const Dataset back = parse_dataset(s1);
    CHECK(back == d);
    CHECK(serialize_dataset(back) == s1);
    CHECK(serialize_dataset(d) == s1);
  }

  TEST_CASE("generated datasets round trip") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      fixture::PersonScene s = fixture::person_scene(5, 64, 48, seed);
      Rng rng(seed);
      for (Annotation& a : s.dataset.annotations) {
        if (rng.uniform01() < 0.5) {
          BinaryMask m = polygon_to_mask(std::get<std::vector<Polygon>>(a.segmentation), 64, 48);
          const RleCounts r = mask_to_rle(m);
          a.segmentation = CompressedRle{r.height, r.width, rle_encode_string(r)};
          OcclusionAttributes attrs;
          attrs.level = level_from_index(int(rng.uniform_int(0, 3)));
          attrs.visible_fraction = rng.uniform01();
          attrs.fully_occluded = false;
          a.attributes = attrs;
        }
      }
      const Dataset back = parse_dataset(serialize_dataset(s.dataset));
      CHECK(back == s.dataset);
    }
  }

  TEST_CASE("referential integrity errors name the offending id") {
    const std::string doc = R"({"images": [{"id": 1, "file_name": "a.png", "width": 4, "height": 4}],
      "categories": [{"id": 1, "name": "person"}],
      "annotations": [{"id": 5, "image_id": 99, "category_id": 1, "bbox": [0,0,1,1], "area": 1, "iscrowd": 0}]})";
    try {
      validate_dataset(parse_dataset(doc));
      FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
      CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
  }

  TEST_CASE("malformed documents and broken invariants are rejected") {
    CHECK_THROWS_AS(parse_dataset("{not json"), DatasetError);
    CHECK_THROWS_AS(parse_dataset("[]"), DatasetError);
    CHECK_THROWS_AS(validate_dataset(parse_dataset(
                        R"({"images": [{"id": 1, "file_name": "a", "width": 4, "height": 4},
                                       {"id": 1, "file_name": "b", "width": 4, "height": 4}],
                            "categories": [], "annotations": []})")),
                    DatasetError);
    CHECK_THROWS_AS(validate_dataset(parse_dataset(
                        R"({"images": [{"id": 1, "file_name": "a", "width": 4, "height": 4}],
                            "categories": [{"id": 1, "name": "person"}],
                            "annotations": [{"id": 1, "image_id": 1, "category_id": 7, "bbox": [0,0,1,1],
                                             "area": 1, "iscrowd": 0}]})")),
                    DatasetError);
    CHECK_THROWS_AS(validate_dataset(parse_dataset(
                        R"({"images": [{"id": 1, "file_name": "a", "width": 4, "height": 4}],
                            "categories": [{"id": 1, "name": "person"}],
                            "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [0,0,-1,1],
                                             "area": 1, "iscrowd": 0}]})")),
                    DatasetError);
    CHECK_THROWS_AS(validate_dataset(parse_dataset(
                        R"({"images": [{"id": 1, "file_name": "a", "width": 4, "height": 4}],
                            "categories": [{"id": 1, "name": "person"}],
                            "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [0,0,9,9],
                                             "area": 1, "iscrowd": 0}]})")),
                    DatasetError);
  }

  TEST_CASE("polygon rasterization: square, degenerate, disjoint triangles") {
    const std::vector<Polygon> square{{{0, 0}, {4, 0}, {4, 4}, {0, 4}}};
    const BinaryMask m = polygon_to_mask(square, 8, 8);
    CHECK(m.area() == 16);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) CHECK(m.get(r, c) == (r < 4 && c < 4));

    CHECK_THROWS_AS(polygon_to_mask(std::vector<Polygon>{{{0, 0}, {3, 3}}}, 8, 8), MaskError);

    const Polygon t1{{0, 0}, {6, 0}, {0, 6}};
    const Polygon t2{{10, 10}, {16, 10}, {16, 16}};
    const std::vector<Polygon> both{t1, t2};
    const auto a1 = polygon_to_mask(std::vector<Polygon>{t1}, 20, 20).area();
    const auto a2 = polygon_to_mask(std::vector<Polygon>{t2}, 20, 20).area();
    CHECK(polygon_to_mask(both, 20, 20).area() == a1 + a2);
    CHECK(polygon_to_mask(both, 20, 20) == oracle::rasterize(both, 20, 20));
  }

  TEST_CASE("polygon rasterization: self-intersecting and off-canvas polygons follow even-odd") {
    const std::vector<Polygon> bowtie{{{0, 0}, {10, 10}, {10, 0}, {0, 10}}};
    CHECK(polygon_to_mask(bowtie, 12, 12) == oracle::rasterize(bowtie, 12, 12));
    const std::vector<Polygon> star{{{5, 0}, {8, 10}, {0, 4}, {10, 4}, {2, 10}}};
    const BinaryMask s = polygon_to_mask(star, 12, 12);
    CHECK(s == oracle::rasterize(star, 12, 12));
    CHECK_FALSE(s.get(5, 5));  // the pentagram's centre has winding 2: even-odd leaves it empty
    const std::vector<Polygon> big{{{-5, -5}, {30, -5}, {30, 30}, {-5, 30}}};
    CHECK(polygon_to_mask(big, 7, 5).area() == 35);
  }

  TEST_CASE("mask RLE: hand-traced cases and errors") {
    CHECK(mask_to_rle(BinaryMask(2, 3)).counts == std::vector<std::uint32_t>{6});
    BinaryMask one(2, 3);
    one.set(0, 0);
    CHECK(mask_to_rle(one).counts == std::vector<std::uint32_t>{0, 1, 5});
    BinaryMask col(2, 3);
    col.set(0, 1);
    col.set(2, 1);
    CHECK(mask_to_rle(col).counts == std::vector<std::uint32_t>{3, 1, 1, 1});
    CHECK(rle_to_mask(RleCounts{3, 2, {0, 1, 5}}) == one);
    CHECK_THROWS_AS(rle_to_mask(RleCounts{3, 2, {1, 1}}), RleError);
    CHECK_THROWS_AS(rle_to_mask(RleCounts{3, 2, {1, 10}}), RleError);
  }

  TEST_CASE("mask RLE agrees with the naive encoder and round trips") {
    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
      const int w = int(rng.uniform_int(1, 40));
      const int h = int(rng.uniform_int(1, 40));
      BinaryMask m(w, h);
      const double p = rng.uniform01();
      for (auto& b : m.bits()) b = rng.uniform01() < p ? 1 : 0;
      const RleCounts r = mask_to_rle(m);
      CHECK(r.counts == oracle::rle_counts(m));
      CHECK(rle_to_mask(r) == m);
    }
  }

  TEST_CASE("compressed RLE strings") {
    CHECK(rle_encode_string(RleCounts{3, 2, {6}}) == "6");
    CHECK(rle_encode_string(RleCounts{2, 2, {0, 4}}) == "04");
    CHECK(rle_encode_string(RleCounts{0, 0, {}}).empty());
    CHECK(rle_encode_string(RleCounts{10, 10, {100}}) == "T3");
    CHECK(rle_encode_string(RleCounts{4, 4, {16}}) == "`0");
    // counts[3] is delta-coded against counts[1]: 4 - 2 = 2, and 0 - 1 = -1.
    CHECK(rle_encode_string(RleCounts{10, 1, {1, 2, 3, 4}}) == "1232");
    CHECK(rle_encode_string(RleCounts{8, 1, {5, 1, 2, 0}}) == "512O");
    CHECK(rle_decode_string("512O", 8, 1).counts == std::vector<std::uint32_t>{5, 1, 2, 0});
    CHECK(rle_decode_string("T3", 10, 10).counts == std::vector<std::uint32_t>{100});
    CHECK(rle_decode_string("", 0, 0).counts.empty());
    CHECK_THROWS_AS(rle_decode_string("6\x7f", 3, 2), RleError);
    CHECK_THROWS_AS(rle_decode_string("6 ", 3, 2), RleError);
    CHECK_THROWS_AS(rle_decode_string("T", 10, 10), RleError);  // continuation bit set on the last chunk
    CHECK_THROWS_AS(rle_decode_string("5", 3, 2), RleError);    // counts do not cover the mask
  }

  TEST_CASE("compressed RLE round trips random count lists") {
    Rng rng(7);
    for (int i = 0; i < 300; ++i) {
      RleCounts r;
      const int n = int(rng.uniform_int(1, 30));
      std::uint64_t total = 0;
      for (int k = 0; k < n; ++k) {
        const auto v = std::uint32_t(rng.uniform_int(k == 0 ? 0 : 1, rng.uniform01() < 0.1 ? 100000 : 40));
        r.counts.push_back(v);
        total += v;
      }
      if (total == 0) continue;
      r.height = 1;
      r.width = int(total);
      CHECK(rle_decode_string(rle_encode_string(r), r.height, r.width) == r);
    }
  }

  TEST_CASE("segmentation_to_mask handles every form") {
    const Dataset d = parse_dataset(kSample);
    const auto poly = segmentation_to_mask(d.annotations[0].segmentation, 8, 6);
    REQUIRE(poly);
    CHECK(poly->area() == 16);
    const auto rle = segmentation_to_mask(d.annotations[1].segmentation, 8, 6);
    REQUIRE(rle);
    CHECK(rle->area() == 4);
    const RleCounts r = mask_to_rle(*rle);
    const auto comp = segmentation_to_mask(CompressedRle{6, 8, rle_encode_string(r)}, 8, 6);
    REQUIRE(comp);
    CHECK(*comp == *rle);
    CHECK_FALSE(segmentation_to_mask(std::monostate{}, 8, 6));
    CHECK_THROWS(segmentation_to_mask(RleCounts{5, 8, {40}}, 8, 6));
  }

  TEST_CASE("save and load through a file") {
    fixture::TempDir dir;
    const Dataset d = parse_dataset(kSample);
    save_dataset(d, (dir / "d.json").string());
    CHECK(load_dataset((dir / "d.json").string()) == d);
    CHECK_THROWS_AS(load_dataset((dir / "missing.json").string()), DatasetError);
  }
}
