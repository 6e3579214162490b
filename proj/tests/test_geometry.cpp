#include <gtest/gtest.h>

#include <random>

#include "detkit/annotations.hpp"
#include "detkit/geometry.hpp"
#include "detkit/yolo_io.hpp"

using namespace detkit;

namespace {

ClassRegistry two_classes() { return ClassRegistry({{0, "wb"}, {1, "bb"}}); }

BoundingBox random_box(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> pos(0.0, 1.0), size(0.01, 1.0);
  return {pos(gen), pos(gen), size(gen), size(gen)};
}

}  // namespace

TEST(Iou, IdenticalBoxesGiveOne) {
  BoundingBox b{0.4, 0.6, 0.2, 0.3};
  EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
  EXPECT_DOUBLE_EQ(giou(b, b), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero) {
  EXPECT_EQ(iou(BoundingBox{0.1, 0.1, 0.1, 0.1}, BoundingBox{0.9, 0.9, 0.1, 0.1}), 0.0);
}

TEST(Iou, TouchingEdgesHaveNoOverlap) {
  EXPECT_EQ(iou(PixelRect{0, 0, 1, 1}, PixelRect{1, 0, 2, 1}), 0.0);
}

TEST(Iou, OverlappingCornersInPixelSpace) {
  EXPECT_NEAR(iou(PixelRect{0, 0, 2, 2}, PixelRect{1, 1, 3, 3}), 1.0 / 7.0, 1e-12);
}

TEST(Iou, ZeroAreaUnionIsZero) {
  EXPECT_EQ(iou(PixelRect{1, 1, 1, 1}, PixelRect{1, 1, 1, 1}), 0.0);
  EXPECT_EQ(giou(PixelRect{1, 1, 1, 1}, PixelRect{1, 1, 1, 1}), 0.0);
}

TEST(Giou, SeparatedUnitSquares) {
  EXPECT_NEAR(giou(PixelRect{0, 0, 1, 1}, PixelRect{2, 0, 3, 1}), -1.0 / 3.0, 1e-12);
}

TEST(Giou, NestedBoxEqualsIou) {
  PixelRect outer{0, 0, 4, 4}, inner{1, 1, 3, 3};
  EXPECT_NEAR(giou(outer, inner), 0.25, 1e-12);
  EXPECT_NEAR(iou(outer, inner), 0.25, 1e-12);
}

TEST(Geometry, MixedFramesAgree) {
  const BoundingBox a{0.5, 0.5, 0.2, 0.4};
  const BoundingBox b{0.55, 0.45, 0.2, 0.2};
  const PixelRect pa = to_pixels(a, 1, 1), pb = to_pixels(b, 1, 1);
  EXPECT_NEAR(iou(a, b), iou(pa, pb), 1e-15);
  EXPECT_NEAR(iou(a, pb), iou(pa, b), 1e-15);
}

TEST(GeometryProperty, SymmetricBoundedAndOrdered) {
  std::mt19937_64 gen(7);
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_box(gen), b = random_box(gen);
    const double ab = iou(a, b), g = giou(a, b);
    EXPECT_EQ(ab, iou(b, a));
    EXPECT_EQ(g, giou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_GT(g, -1.0);
    EXPECT_LE(g, 1.0);
    EXPECT_LE(g, ab);
  }
}

TEST(GeometryProperty, GiouEqualsIouWhenEnclosureIsTheUnion) {
  // Boxes sharing a full side: the enclosing rectangle is exactly the union.
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.05, 0.4);
  for (int i = 0; i < 1000; ++i) {
    const double h = u(gen), w1 = u(gen), w2 = u(gen), overlap = u(gen) * std::min(w1, w2);
    PixelRect a{0.0, 0.0, w1, h}, b{w1 - overlap, 0.0, w1 - overlap + w2, h};
    EXPECT_NEAR(giou(a, b), iou(a, b), 1e-12);
  }
}

TEST(GeometryProperty, MatchesPixelRasterization) {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> coord(0, 40), len(1, 20);
  for (int trial = 0; trial < 300; ++trial) {
    const int ax = coord(gen), ay = coord(gen), bx = coord(gen), by = coord(gen);
    PixelRect a{double(ax), double(ay), double(ax + len(gen)), double(ay + len(gen))};
    PixelRect b{double(bx), double(by), double(bx + len(gen)), double(by + len(gen))};
    int inter = 0, uni = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const bool in_a = px > a.x0 && px < a.x1 && py > a.y0 && py < a.y1;
        const bool in_b = px > b.x0 && px < b.x1 && py > b.y0 && py < b.y1;
        inter += in_a && in_b;
        uni += in_a || in_b;
      }
    EXPECT_NEAR(iou(a, b), double(inter) / uni, 2.0 / uni);
  }
}

TEST(BoundingBox, ValidityAndClipping) {
  EXPECT_TRUE((BoundingBox{0.5, 0.5, 1.0, 1.0}.valid()));
  EXPECT_FALSE((BoundingBox{0.5, 0.5, 0.0, 0.2}.valid()));
  const auto c = BoundingBox{0.95, 0.5, 0.2, 0.2}.clipped();
  EXPECT_NEAR(c.x_max(), 1.0, 1e-15);
  EXPECT_NEAR(c.w, 0.15, 1e-15);
}

TEST(PixelConversion, RoundTrip) {
  const BoundingBox b{0.3, 0.6, 0.1, 0.25};
  const auto back = to_normalized(to_pixels(b, 1600, 1300), 1600, 1300);
  EXPECT_NEAR(back.cx, b.cx, 1e-15);
  EXPECT_NEAR(back.cy, b.cy, 1e-15);
  EXPECT_NEAR(back.w, b.w, 1e-15);
  EXPECT_NEAR(back.h, b.h, 1e-15);
}

TEST(ClassRegistry, RejectsDuplicatesAndKeepsIdOrder) {
  ClassRegistry reg;
  reg.add({1, "bb"});
  reg.add({0, "wb"});
  EXPECT_EQ(reg.labels().front().name, "wb");
  EXPECT_EQ(reg.index_of(1), 1u);
  EXPECT_THROW(reg.add({1, "other"}), RegistryError);
  EXPECT_THROW(reg.add({2, "wb"}), RegistryError);
  EXPECT_THROW(reg.add({-1, "neg"}), RegistryError);
  EXPECT_THROW(reg.name(9), RegistryError);
}

TEST(YoloAnnotation, ParsesOneObject) {
  const auto objs = parse_yolo_annotation("0 0.5 0.5 0.1 0.2\n", two_classes());
  ASSERT_EQ(objs.size(), 1u);
  EXPECT_EQ(objs[0].label, 0);
  EXPECT_EQ(objs[0].box, (BoundingBox{0.5, 0.5, 0.1, 0.2}));
}

TEST(YoloAnnotation, EmptyTextIsEmptyList) {
  EXPECT_TRUE(parse_yolo_annotation("", two_classes()).empty());
  EXPECT_TRUE(parse_yolo_annotation("\n\n", two_classes()).empty());
}

TEST(YoloAnnotation, OutOfRangeWidthNamesLine) {
  try {
    parse_yolo_annotation("0 0.5 0.5 0.1 0.2\n0 0.5 0.5 1.2 0.2\n", two_classes());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(YoloAnnotation, RejectsMalformedLines) {
  const auto reg = two_classes();
  EXPECT_THROW(parse_yolo_annotation("0 0.5 0.5 0.1", reg), ParseError);
  EXPECT_THROW(parse_yolo_annotation("0 0.5 abc 0.1 0.2", reg), ParseError);
  EXPECT_THROW(parse_yolo_annotation("0 0.5 0.5 0.0 0.2", reg), ParseError);
  EXPECT_THROW(parse_yolo_annotation("0 -0.1 0.5 0.1 0.2", reg), ParseError);
  EXPECT_THROW(parse_yolo_annotation("7 0.5 0.5 0.1 0.2", reg), RegistryError);
}

TEST(YoloPrediction, ParsesConfidence) {
  const auto dets = parse_yolo_prediction("1 0.3 0.3 0.2 0.2 0.91", two_classes());
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].label, 1);
  EXPECT_DOUBLE_EQ(dets[0].confidence, 0.91);
}

TEST(YoloPrediction, RejectsConfidenceAboveOne) {
  EXPECT_THROW(parse_yolo_prediction("1 0.3 0.3 0.2 0.2 1.5", two_classes()), ParseError);
}

TEST(YoloPrediction, PreservesLineOrder) {
  const auto dets =
      parse_yolo_prediction("1 0.3 0.3 0.2 0.2 0.5\n0 0.7 0.7 0.1 0.1 0.9\n", two_classes());
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_EQ(dets[0].label, 1);
  EXPECT_EQ(dets[1].label, 0);
}

TEST(YoloRoundTrip, PreservesFieldsToSixDecimals) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> pos(0.0, 1.0), size(1e-3, 1.0);
  std::uniform_int_distribution<int> cls(0, 1);
  const auto reg = two_classes();
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Detection> dets;
    for (int k = 0; k < 5; ++k) dets.push_back({cls(gen), {pos(gen), pos(gen), size(gen), size(gen)}, pos(gen)});
    const auto parsed = parse_yolo_prediction(serialize_yolo(dets), reg);
    ASSERT_EQ(parsed.size(), dets.size());
    for (std::size_t k = 0; k < dets.size(); ++k) {
      EXPECT_EQ(parsed[k].label, dets[k].label);
      EXPECT_NEAR(parsed[k].box.cx, dets[k].box.cx, 5e-7);
      EXPECT_NEAR(parsed[k].box.cy, dets[k].box.cy, 5e-7);
      EXPECT_NEAR(parsed[k].box.w, dets[k].box.w, 5e-7);
      EXPECT_NEAR(parsed[k].box.h, dets[k].box.h, 5e-7);
      EXPECT_NEAR(parsed[k].confidence, dets[k].confidence, 5e-7);
    }
    // A second pass is a fixed point.
    EXPECT_EQ(serialize_yolo(parse_yolo_prediction(serialize_yolo(parsed), reg)), serialize_yolo(parsed));
  }
}

TEST(ClassRegistryFile, ParsesAndSerializes) {
  const auto reg = parse_class_registry("1 bb\n0 wb\n");
  EXPECT_EQ(serialize_registry(reg), "0 wb\n1 bb\n");
  EXPECT_THROW(parse_class_registry("0 wb\n0 bb\n"), RegistryError);
  EXPECT_THROW(parse_class_registry("0\n"), ParseError);
}
