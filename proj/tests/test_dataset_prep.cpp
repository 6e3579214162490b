#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "detkit/augment.hpp"
#include "detkit/split.hpp"
#include "detkit/tiling.hpp"

using namespace detkit;

namespace {

AnnotatedImage image_with(std::vector<GroundTruthObject> objs, int w = 1600, int h = 1300) {
  return {"img", w, h, std::move(objs)};
}

AugmentPipeline single_op(AugmentKind kind, double p, std::uint64_t seed = 1) {
  AugmentPipeline pipe;
  pipe.rng_seed = seed;
  AugmentOp op;
  op.kind = kind;
  op.probability = p;
  pipe.ops.push_back(op);
  return pipe;
}

std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("img" + std::to_string(i));
  return ids;
}

}  // namespace

TEST(PlanTiles, ExactGrid) {
  const auto tiles = plan_tiles(832, 832, TileSpec{});
  ASSERT_EQ(tiles.size(), 4u);
  EXPECT_EQ(tiles[3], (TileRect{416, 416, 416, 416}));
  for (std::size_t i = 0; i < tiles.size(); ++i)
    for (std::size_t j = i + 1; j < tiles.size(); ++j)
      EXPECT_EQ(intersection_area(tiles[i].rect(), tiles[j].rect()), 0.0);
}

TEST(PlanTiles, AnchorsLastRowAndColumnToEdge) {
  const auto tiles = plan_tiles(1600, 1300, TileSpec{});
  ASSERT_EQ(tiles.size(), 16u);
  std::set<int> xs, ys;
  for (const auto& t : tiles) {
    xs.insert(t.x0);
    ys.insert(t.y0);
    EXPECT_LE(t.x0 + t.w, 1600);
    EXPECT_LE(t.y0 + t.h, 1300);
  }
  EXPECT_EQ(*xs.rbegin(), 1184);
  EXPECT_EQ(*ys.rbegin(), 884);
}

TEST(PlanTiles, TileEqualToImageIsSingleTile) {
  const auto tiles = plan_tiles(416, 416, TileSpec{});
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0], (TileRect{0, 0, 416, 416}));
}

TEST(PlanTiles, PadPolicyExtendsPastTheEdge) {
  TileSpec spec;
  spec.edge_policy = EdgePolicy::kPad;
  const auto tiles = plan_tiles(1600, 1300, spec);
  ASSERT_EQ(tiles.size(), 16u);
  EXPECT_EQ(tiles.back().x0, 1248);
  EXPECT_EQ(tiles.back().y0, 1248);
}

TEST(PlanTiles, RejectsImagesSmallerThanTile) {
  EXPECT_THROW(plan_tiles(400, 1300, TileSpec{}), DomainError);
}

TEST(PlanTilesProperty, EveryPixelIsCovered) {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> tile(4, 20), extra(0, 60);
  for (int trial = 0; trial < 200; ++trial) {
    TileSpec spec;
    spec.tile_w = tile(gen);
    spec.tile_h = tile(gen);
    const int w = spec.tile_w + extra(gen), h = spec.tile_h + extra(gen);
    const auto tiles = plan_tiles(w, h, spec);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool covered = std::any_of(tiles.begin(), tiles.end(), [&](const TileRect& t) {
          return x >= t.x0 && x < t.x0 + t.w && y >= t.y0 && y < t.y0 + t.h;
        });
        ASSERT_TRUE(covered) << w << "x" << h << " pixel " << x << "," << y;
      }
  }
}

TEST(Retile, BoxInsideOneTileKeepsPixelGeometry) {
  const PixelRect px{100, 100, 140, 160};
  const auto img = image_with({{0, to_normalized(px, 1600, 1300)}});
  const auto out = retile_annotations(img, plan_tiles(1600, 1300, TileSpec{}), TileSpec{});
  int holders = 0;
  for (const auto& ta : out) {
    if (ta.discardable) continue;
    ++holders;
    ASSERT_EQ(ta.image.objects.size(), 1u);
    const auto back = to_pixels(ta.image.objects[0].box, ta.tile.w, ta.tile.h);
    EXPECT_NEAR(back.x0 + ta.tile.x0, px.x0, 1e-9);
    EXPECT_NEAR(back.y0 + ta.tile.y0, px.y0, 1e-9);
    EXPECT_NEAR(back.x1 + ta.tile.x0, px.x1, 1e-9);
    EXPECT_NEAR(back.y1 + ta.tile.y0, px.y1, 1e-9);
  }
  EXPECT_EQ(holders, 1);
}

TEST(Retile, StraddlingBoxKeptOnlyWhereMostlyVisible) {
  // 100 px wide box: 30 px in the left tile, 70 px in the right one.
  const PixelRect px{386, 150, 486, 250};
  const auto img = image_with({{1, to_normalized(px, 832, 416)}}, 832, 416);
  TileSpec spec;
  spec.min_visibility = 0.5;
  const auto out = retile_annotations(img, plan_tiles(832, 416, spec), spec);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].discardable);
  ASSERT_EQ(out[1].image.objects.size(), 1u);
  EXPECT_NEAR(out[1].image.objects[0].box.w, 70.0 / 416.0, 1e-12);
}

TEST(Retile, BagFreeTilesAreDiscardable) {
  const auto img = image_with({{0, {0.05, 0.05, 0.02, 0.02}}});
  const auto out = retile_annotations(img, plan_tiles(1600, 1300, TileSpec{}), TileSpec{});
  const auto kept = std::count_if(out.begin(), out.end(), [](const auto& t) { return !t.discardable; });
  EXPECT_EQ(kept, 1);
  EXPECT_EQ(out[5].image.image_id, "img_t005");
}

TEST(RetileProperty, ZeroVisibilityReachesEveryIntersectedTile) {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> pos(0.05, 0.95), size(0.02, 0.4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GroundTruthObject> objs;
    for (int k = 0; k < 6; ++k) objs.push_back({0, BoundingBox{pos(gen), pos(gen), size(gen), size(gen)}.clipped()});
    const auto img = image_with(objs);
    const auto tiles = plan_tiles(1600, 1300, TileSpec{});
    TileSpec loose, strict;
    loose.min_visibility = 0.0;
    strict.min_visibility = 1.0;
    const auto a = retile_annotations(img, tiles, loose);
    const auto b = retile_annotations(img, tiles, strict);
    std::size_t n_loose = 0, n_strict = 0, expected = 0;
    for (std::size_t t = 0; t < tiles.size(); ++t) {
      n_loose += a[t].image.objects.size();
      n_strict += b[t].image.objects.size();
      for (const auto& o : objs) expected += intersection_area(to_pixels(o.box, 1600, 1300), tiles[t].rect()) > 0.0;
    }
    EXPECT_EQ(n_loose, expected);
    EXPECT_GE(n_loose, n_strict);
  }
}

TEST(Augment, ZeroProbabilitiesAreIdentity) {
  auto pipe = reference_pipeline(9);
  for (auto& op : pipe.ops) op.probability = 0.0;
  const auto img = image_with({{0, {0.3, 0.4, 0.1, 0.2}}, {1, {0.7, 0.2, 0.05, 0.05}}});
  for (const auto& out : augment(img, pipe, 20)) {
    EXPECT_EQ(out.objects, img.objects);
    EXPECT_EQ(out.width_px, img.width_px);
  }
}

TEST(Augment, FlipTwiceRestoresDyadicCoordinates) {
  AugmentPipeline pipe = single_op(AugmentKind::kFlipLeftRight, 1.0);
  pipe.ops.push_back(pipe.ops[0]);
  std::vector<GroundTruthObject> objs;
  for (int k = 1; k < 64; k += 5) objs.push_back({0, {k / 64.0, (64 - k) / 64.0, 1 / 32.0, 3 / 64.0}});
  const auto img = image_with(objs);
  const auto s = augment_sample(img, pipe, 0);
  EXPECT_EQ(s.applied.size(), 2u);
  EXPECT_EQ(s.image.objects, img.objects);
}

TEST(Augment, FlipsAreInvolutionsOnUpperHalfCoordinates) {
  // 1 - (1 - x) == x exactly for x in [0.5, 1] (Sterbenz).
  std::mt19937_64 gen(29);
  std::uniform_real_distribution<double> upper(0.5, 1.0);
  for (AugmentKind kind : {AugmentKind::kFlipLeftRight, AugmentKind::kFlipTopBottom}) {
    AugmentPipeline pipe = single_op(kind, 1.0);
    pipe.ops.push_back(pipe.ops[0]);
    std::vector<GroundTruthObject> objs;
    for (int k = 0; k < 50; ++k) objs.push_back({0, {upper(gen), upper(gen), 0.01, 0.02}});
    const auto img = image_with(objs);
    EXPECT_EQ(augment_sample(img, pipe, 3).image.objects, img.objects);
  }
}

TEST(Augment, QuarterTurnAboutCenter) {
  AugmentPipeline pipe = single_op(AugmentKind::kRotate, 1.0);
  pipe.ops[0].right_angles = {90};
  const auto s = augment_sample(image_with({{0, {0.25, 0.5, 0.1, 0.2}}}), pipe, 0);
  ASSERT_EQ(s.image.objects.size(), 1u);
  const auto& b = s.image.objects[0].box;
  EXPECT_DOUBLE_EQ(b.cx, 0.5);
  EXPECT_DOUBLE_EQ(b.cy, 0.25);
  EXPECT_DOUBLE_EQ(b.w, 0.2);
  EXPECT_DOUBLE_EQ(b.h, 0.1);
  EXPECT_EQ(s.image.width_px, 1300);
  EXPECT_EQ(s.image.height_px, 1600);
}

TEST(Augment, QuarterTurnMatchesCornerRotation) {
  // Rotate the corners of the pixel box about the image center and compare.
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> pos(0.2, 0.8), size(0.05, 0.3);
  AugmentPipeline pipe = single_op(AugmentKind::kRotate, 1.0);
  pipe.ops[0].right_angles = {90};
  const double W = 1600, H = 1300;
  for (int trial = 0; trial < 100; ++trial) {
    const BoundingBox b{pos(gen), pos(gen), size(gen), size(gen)};
    const auto out = augment_sample(image_with({{0, b}}), pipe, 0).image.objects.at(0).box;
    // Clockwise quarter turn in image coordinates (y down): (x, y) -> (H - y, x).
    const PixelRect px = to_pixels(b, W, H);
    const PixelRect rot{H - px.y1, px.x0, H - px.y0, px.x1};
    const auto expect = to_normalized(rot, H, W);
    EXPECT_NEAR(out.cx, expect.cx, 1e-12);
    EXPECT_NEAR(out.cy, expect.cy, 1e-12);
    EXPECT_NEAR(out.w, expect.w, 1e-12);
    EXPECT_NEAR(out.h, expect.h, 1e-12);
  }
}

TEST(Augment, FullTurnIsIdentity) {
  AugmentPipeline pipe = single_op(AugmentKind::kRotate, 1.0);
  pipe.ops[0].right_angles = {180};
  pipe.ops.push_back(pipe.ops[0]);
  const auto img = image_with({{0, {0.75, 0.625, 0.125, 0.25}}});
  EXPECT_EQ(augment_sample(img, pipe, 0).image.objects, img.objects);
}

TEST(Augment, ZoomDropsBoxesOutsideTheCrop) {
  AugmentPipeline pipe = single_op(AugmentKind::kZoomRandom, 1.0);
  pipe.ops[0].percentage_area = 0.25;  // central half-width crop
  const auto img = image_with({{0, {0.5, 0.5, 0.1, 0.1}}, {1, {0.05, 0.05, 0.05, 0.05}}});
  const auto s = augment_sample(img, pipe, 0);
  ASSERT_EQ(s.image.objects.size(), 1u);
  EXPECT_NEAR(s.image.objects[0].box.w, 0.2, 1e-12);
  EXPECT_NEAR(s.image.objects[0].box.cx, 0.5, 1e-12);
}

TEST(Augment, FreeRotationEnvelopeContainsBox) {
  AugmentPipeline pipe = single_op(AugmentKind::kRotate, 1.0);
  pipe.ops[0].free_rotation_max_deg = 25.0;
  const auto img = image_with({{0, {0.5, 0.5, 0.1, 0.1}}}, 1000, 1000);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto s = augment_sample(img, pipe, i);
    ASSERT_EQ(s.image.objects.size(), 1u);
    EXPECT_GE(s.image.objects[0].box.w, 0.1 - 1e-12);
    EXPECT_LE(s.image.objects[0].box.w, 0.1 * std::sqrt(2.0) + 1e-12);
  }
}

TEST(AugmentProperty, SameSeedAndIndexAreBitIdentical) {
  const auto pipe = reference_pipeline(1234);
  const auto img = image_with({{0, {0.3, 0.4, 0.1, 0.2}}, {1, {0.6, 0.7, 0.2, 0.1}}});
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto a = augment_sample(img, pipe, i);
    const auto b = augment_sample(img, pipe, i);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.applied, b.applied);
  }
  EXPECT_EQ(augment(img, pipe, 50), augment(img, pipe, 50));
}

TEST(AugmentProperty, ApplicationRatesFollowProbabilities) {
  const auto pipe = reference_pipeline(77);
  const auto img = image_with({{0, {0.5, 0.5, 0.1, 0.1}}});
  std::map<std::string, int> counts;
  const int n = 20000;
  for (int i = 0; i < n; ++i)
    for (const auto& a : augment_sample(img, pipe, std::uint64_t(i)).applied)
      ++counts[a.substr(0, a.find(':'))];
  EXPECT_NEAR(counts["rotate"] / double(n), 0.7, 0.02);
  EXPECT_NEAR(counts["flip_left_right"] / double(n), 0.4, 0.02);
  EXPECT_NEAR(counts["zoom_random"] / double(n), 0.4, 0.02);
  EXPECT_NEAR(counts["flip_top_bottom"] / double(n), 0.4, 0.02);
}

TEST(AugmentPipeline, ValidationRejectsBadParameters) {
  auto pipe = single_op(AugmentKind::kRotate, 1.5);
  EXPECT_THROW(pipe.validate(), ConfigError);
  pipe = single_op(AugmentKind::kRotate, 0.5);
  pipe.ops[0].right_angles = {45};
  EXPECT_THROW(pipe.validate(), ConfigError);
  pipe = single_op(AugmentKind::kZoomRandom, 0.5);
  pipe.ops[0].percentage_area = 0.0;
  EXPECT_THROW(pipe.validate(), ConfigError);
}

TEST(Split, ReferenceAllocation) {
  const auto s = split_dataset(make_ids(141), SplitRatio{}, 0);
  EXPECT_EQ(s.train.size(), 106u);
  EXPECT_EQ(s.val.size(), 21u);
  EXPECT_EQ(s.test.size(), 14u);
}

TEST(Split, ExactWeights) {
  const auto s = split_dataset(make_ids(20), SplitRatio{}, 5);
  EXPECT_EQ(s.train.size(), 15u);
  EXPECT_EQ(s.val.size(), 3u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, SizesFixedMembershipVaries) {
  const auto ids = make_ids(141);
  std::set<std::vector<std::string>> trains;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_dataset(ids, SplitRatio{}, seed);
    EXPECT_EQ(s.train.size(), 106u);
    EXPECT_EQ(s.val.size(), 21u);
    EXPECT_EQ(s.test.size(), 14u);
    trains.insert(s.train);
  }
  EXPECT_GT(trains.size(), 1u);
}

TEST(Split, TooFewImages) {
  EXPECT_THROW(split_dataset(make_ids(2), SplitRatio{}, 0), DomainError);
}

TEST(Apportion, MatchesLargestRemainderByHand) {
  // 10 at 1:1:1 -> quotas 3.33 each; the tie goes to train.
  EXPECT_EQ(apportion(10, {1, 1, 1}), (std::array<std::size_t, 3>{4, 3, 3}));
  EXPECT_EQ(apportion(11, {1, 1, 1}), (std::array<std::size_t, 3>{4, 4, 3}));
  // 7 at 15:3:2 -> 5.25, 1.05, 0.70: the largest remainder is test's.
  EXPECT_EQ(apportion(7, {15, 3, 2}), (std::array<std::size_t, 3>{5, 1, 1}));
}

TEST(SplitProperty, PartitionsAreExhaustiveAndDisjoint) {
  std::mt19937_64 gen(41);
  std::uniform_int_distribution<int> size(3, 300), w(1, 20);
  for (int trial = 0; trial < 300; ++trial) {
    const auto ids = make_ids(std::size_t(size(gen)));
    const SplitRatio ratio{w(gen), w(gen), w(gen)};
    const auto s = split_dataset(ids, ratio, gen());
    std::multiset<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    EXPECT_EQ(all.size(), ids.size());
    EXPECT_EQ(std::set<std::string>(all.begin(), all.end()), std::set<std::string>(ids.begin(), ids.end()));
  }
}

TEST(SampleSubsets, WithoutReplacementIsDisjoint) {
  const auto pool = make_ids(1410);
  const auto sets = sample_subsets(pool, 10, 141, false, 3);
  ASSERT_EQ(sets.size(), 10u);
  std::set<std::string> seen;
  for (const auto& s : sets) {
    EXPECT_EQ(s.size(), 141u);
    seen.insert(s.begin(), s.end());
  }
  EXPECT_EQ(seen.size(), 1410u);
}

TEST(SampleSubsets, WithReplacementHasNoRepeatsWithinASet) {
  const auto pool = make_ids(200);
  const auto sets = sample_subsets(pool, 10, 141, true, 3);
  for (const auto& s : sets) EXPECT_EQ(std::set<std::string>(s.begin(), s.end()).size(), 141u);
  EXPECT_THROW(sample_subsets(pool, 10, 141, false, 3), DomainError);
}
