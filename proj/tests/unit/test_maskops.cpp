#include "doctest.h"

#include "foliage/maskops.hpp"

using namespace foliage;

namespace {

BinaryMask block(int w, int h, int x0, int y0, int bw, int bh) {
  BinaryMask m(w, h);
  for (int r = y0; r < y0 + bh; ++r)
    for (int c = x0; c < x0 + bw; ++c) m.set(r, c);
  return m;
}

}  // namespace

TEST_SUITE("maskops") {
  TEST_CASE("mask_and_not: identity, annihilation, counting") {
    const BinaryMask base = block(20, 20, 0, 0, 10, 10);
    CHECK(mask_and_not(base, BinaryMask(20, 20)) == base);
    CHECK(mask_and_not(base, base).area() == 0);
    const BinaryMask occ = block(20, 20, 0, 0, 4, 10);  // 40 of the 100
    CHECK(mask_and_not(base, occ).area() == 60);
    CHECK_THROWS_AS(mask_and_not(base, BinaryMask(20, 19)), MaskError);
  }

  TEST_CASE("mask_or") {
    const BinaryMask a = block(8, 8, 0, 0, 4, 4);
    const BinaryMask b = block(8, 8, 2, 2, 4, 4);
    CHECK(mask_or(a, b).area() == 16 + 16 - 4);
    CHECK_THROWS_AS(mask_or(a, BinaryMask(4, 4)), MaskError);
  }

  TEST_CASE("visible_fraction") {
    const BinaryMask base = block(20, 20, 0, 0, 10, 10);
    CHECK(visible_fraction(base, base) == 1.0);
    CHECK(visible_fraction(base, BinaryMask(20, 20)) == 0.0);
    CHECK(visible_fraction(base, block(20, 20, 0, 0, 6, 10)) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK_THROWS_AS(visible_fraction(BinaryMask(20, 20), BinaryMask(20, 20)), MaskError);
    CHECK_THROWS_AS(visible_fraction(base, BinaryMask(5, 5)), MaskError);
    CHECK_THROWS_AS(visible_fraction(base, block(20, 20, 15, 15, 2, 2)), MaskError);
  }

  TEST_CASE("box_iou") {
    CHECK(box_iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
    CHECK(box_iou({0, 0, 10, 10}, {20, 20, 5, 5}) == 0.0);
    CHECK(box_iou({0, 0, 10, 10}, {10, 0, 10, 10}) == 0.0);
    CHECK(box_iou({0, 0, 10, 10}, {5, 5, 10, 10}) == doctest::Approx(25.0 / 175.0).epsilon(1e-15));
    CHECK(box_iou({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
  }

  TEST_CASE("bbox_of_mask") {
    CHECK_FALSE(bbox_of_mask(BinaryMask(8, 8)));
    BinaryMask one(10, 10);
    one.set(3, 7);
    CHECK(*bbox_of_mask(one) == Box{7, 3, 1, 1});
    CHECK(*bbox_of_mask(block(8, 8, 0, 0, 4, 4)) == Box{0, 0, 4, 4});
    BinaryMask two(10, 10);
    two.set(1, 8);
    two.set(6, 2);
    CHECK(*bbox_of_mask(two) == Box{2, 1, 7, 6});
  }

  TEST_CASE("classify_occlusion") {
    CHECK(classify_occlusion(0.0) == OcclusionLevel::L0);
    CHECK(classify_occlusion(0.5) == OcclusionLevel::L2);
    CHECK(classify_occlusion(1.0) == OcclusionLevel::L3);
    CHECK(classify_occlusion(0.05) == OcclusionLevel::L1);
    CHECK(classify_occlusion(0.0499) == OcclusionLevel::L0);
    CHECK(classify_occlusion(0.35) == OcclusionLevel::L2);
    CHECK(classify_occlusion(0.65) == OcclusionLevel::L3);
    const LevelThresholds custom{0.1, 0.2, 0.3};
    CHECK(classify_occlusion(0.25, custom) == OcclusionLevel::L2);
    CHECK_THROWS(LevelThresholds{0.5, 0.2, 0.3}.validate());
    CHECK_THROWS(LevelThresholds{0.0, 0.2, 1.3}.validate());
  }

  TEST_CASE("level names and indices") {
    CHECK(level_name(OcclusionLevel::L3) == "L3");
    CHECK(level_from_index(1) == OcclusionLevel::L1);
    CHECK_THROWS(level_from_index(4));
    CHECK_THROWS(level_from_index(-1));
  }

  TEST_CASE("ConfusionCounts accumulate") {
    ConfusionCounts a{1, 2, 3, 4};
    a += ConfusionCounts{10, 20, 30, 40};
    CHECK(a == ConfusionCounts{11, 22, 33, 44});
  }
}
