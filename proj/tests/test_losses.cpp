#include <gtest/gtest.h>

#include <random>

#include "detkit/losses.hpp"
#include "test_support.hpp"

using namespace detkit;
using testing_support::fixture;

namespace {

LossFixture load(const std::string& name) {
  return parse_loss_fixture(nlohmann::json::parse(testing_support::slurp(fixture("losses/" + name))));
}

LossConfig grid2() {
  LossConfig cfg;
  cfg.grid_size = 2;
  return cfg;
}

CellPrediction pred(int cell, BoundingBox box, double c, std::vector<double> p) {
  return {cell, 0, box, c, std::move(p)};
}

CellTarget target(int cell, std::optional<BoundingBox> box, double c, std::vector<double> p) {
  return {cell, 0, box.has_value(), box, c, std::move(p)};
}

}  // namespace

TEST(Activations, HardSwishEndpoints) {
  EXPECT_EQ(hard_swish(0.0), 0.0);
  EXPECT_EQ(hard_swish(-3.0), 0.0);
  EXPECT_EQ(hard_swish(-10.0), 0.0);
  EXPECT_EQ(hard_swish(3.0), 3.0);
  EXPECT_EQ(hard_swish(10.0), 10.0);
  EXPECT_EQ(swish(0.0), 0.0);
  EXPECT_EQ(relu6(7.0), 6.0);
}

TEST(Activations, HardSwishTracksSwish) {
  for (int i = -600; i <= 600; ++i) {
    const double x = i / 100.0;
    EXPECT_NEAR(hard_swish(x), swish(x), 0.15) << x;
  }
}

TEST(Losses, PerfectPredictionFixtureIsZero) {
  const auto fx = load("perfect.json");
  EXPECT_EQ(giou_loss(fx.predictions, fx.targets, grid2()), 0.0);
  EXPECT_EQ(objectness_loss(fx.predictions, fx.targets, grid2()), 0.0);
  EXPECT_EQ(classification_loss(fx.predictions, fx.targets, grid2()), 0.0);
}

TEST(Losses, GiouSingleCell) {
  const auto fx = load("giou_single.json");
  EXPECT_NEAR(giou_loss(fx.predictions, fx.targets, LossConfig{}), 4.0 / 3.0, 1e-12);
}

TEST(Losses, ObjectnessPair) {
  const auto fx = load("objectness_pair.json");
  EXPECT_NEAR(objectness_loss(fx.predictions, fx.targets, grid2()), 0.04 + 0.01, 1e-12);
}

TEST(Losses, ObjectnessSingleNoObjectCell) {
  const std::vector<CellPrediction> p{pred(0, {0.5, 0.5, 0.1, 0.1}, 0.5, {})};
  const std::vector<CellTarget> t{target(0, std::nullopt, 0.0, {})};
  LossConfig cfg;
  cfg.lambda_noobj = 0.5;
  EXPECT_NEAR(objectness_loss(p, t, cfg), 0.125, 1e-12);
}

TEST(Losses, ClassificationSingleCell) {
  const auto fx = load("classification_single.json");
  EXPECT_NEAR(classification_loss(fx.predictions, fx.targets, LossConfig{}), 0.18, 1e-12);
}

TEST(Losses, NoObjectCellsGiveZeroBoxLoss) {
  const std::vector<CellPrediction> p{pred(0, {0.5, 0.5, 0.1, 0.1}, 0.2, {0.3})};
  const std::vector<CellTarget> t{target(0, std::nullopt, 0.0, {0.0})};
  EXPECT_EQ(giou_loss(p, t, LossConfig{}), 0.0);
  EXPECT_EQ(classification_loss(p, t, LossConfig{}), 0.0);
}

TEST(Losses, ContractViolations) {
  const std::vector<CellPrediction> p{pred(0, {0.5, 0.5, 0.1, 0.1}, 0.9, {0.3, 0.7})};
  std::vector<CellTarget> t{target(0, BoundingBox{0.5, 0.5, 0.1, 0.1}, 1.0, {0.0, 1.0})};
  t[0].truth_box.reset();
  EXPECT_THROW(giou_loss(p, t, LossConfig{}), ContractError);
  t = {target(0, BoundingBox{0.5, 0.5, 0.1, 0.1}, 1.0, {1.0})};
  EXPECT_THROW(classification_loss(p, t, LossConfig{}), ContractError);
  t = {target(1, BoundingBox{0.5, 0.5, 0.1, 0.1}, 1.0, {0.0, 1.0})};
  EXPECT_THROW(objectness_loss(p, t, grid2()), ContractError);
  EXPECT_THROW(objectness_loss(p, {}, LossConfig{}), ContractError);
}

TEST(LossFixture, RejectsMalformedRecords) {
  EXPECT_THROW(parse_loss_fixture(nlohmann::json::object()), ParseError);
  EXPECT_THROW(parse_loss_fixture(nlohmann::json::parse(R"([{"cell": 0}])")), ParseError);
  EXPECT_THROW(parse_loss_fixture(nlohmann::json::parse(
                   R"([{"cell":0,"anchor":0,"obj":true,"pred_box":[0.5,0.5],"C":1,"C_hat":1,"p":[],"p_hat":[]}])")),
               ParseError);
}

namespace {

struct RandomCells {
  std::vector<CellPrediction> preds;
  std::vector<CellTarget> targets;
};

RandomCells random_cells(std::mt19937_64& gen, int n, const LossConfig& cfg) {
  std::uniform_real_distribution<double> u(0.0, 1.0), pos(0.2, 0.8), size(0.05, 0.3);
  RandomCells rc;
  for (int k = 0; k < n; ++k) {
    const int cell = int(gen() % std::uint64_t(cfg.grid_size * cfg.grid_size));
    const int anchor = int(gen() % std::uint64_t(cfg.anchors_per_scale));
    const bool obj = u(gen) < 0.5;
    rc.preds.push_back({cell, anchor, {pos(gen), pos(gen), size(gen), size(gen)}, u(gen), {u(gen), u(gen)}});
    CellTarget t{cell, anchor, obj, std::nullopt, obj ? 1.0 : 0.0, {0.0, 0.0}};
    if (obj) {
      t.truth_box = BoundingBox{pos(gen), pos(gen), size(gen), size(gen)};
      t.class_distribution[gen() % 2] = 1.0;
    }
    rc.targets.push_back(t);
  }
  return rc;
}

}  // namespace

TEST(LossProperty, NonNegativeAdditiveAndLinearInWeights) {
  std::mt19937_64 gen(211);
  LossConfig cfg;
  cfg.grid_size = 13;
  for (int trial = 0; trial < 200; ++trial) {
    const auto rc = random_cells(gen, 12, cfg);
    const std::span<const CellPrediction> p(rc.preds);
    const std::span<const CellTarget> t(rc.targets);
    for (auto loss : {giou_loss, objectness_loss, classification_loss}) {
      const double whole = loss(p, t, cfg);
      EXPECT_GE(whole, 0.0);
      EXPECT_NEAR(loss(p.first(5), t.first(5), cfg) + loss(p.subspan(5), t.subspan(5), cfg), whole,
                  1e-12 * (1.0 + whole));
    }
    LossConfig scaled = cfg;
    scaled.lambda_coord = 2.5;
    EXPECT_NEAR(giou_loss(p, t, scaled), 2.5 * giou_loss(p, t, cfg), 1e-12);

    // Isolate the no-object term: it is the part that moves with lambda_noobj.
    LossConfig zero = cfg, one = cfg, three = cfg;
    zero.lambda_noobj = 0.0;
    three.lambda_noobj = 3.0;
    const double noobj = objectness_loss(p, t, one) - objectness_loss(p, t, zero);
    EXPECT_NEAR(objectness_loss(p, t, three) - objectness_loss(p, t, zero), 3.0 * noobj, 1e-12);
  }
}

TEST(LossProperty, ZeroWhenGatedTermsMatch) {
  std::mt19937_64 gen(223);
  LossConfig cfg;
  cfg.grid_size = 13;
  for (int trial = 0; trial < 100; ++trial) {
    auto rc = random_cells(gen, 8, cfg);
    for (std::size_t k = 0; k < rc.preds.size(); ++k) {
      rc.preds[k].objectness = rc.targets[k].objectness;
      if (rc.targets[k].has_object) {
        rc.preds[k].box = *rc.targets[k].truth_box;
        rc.preds[k].class_scores = rc.targets[k].class_distribution;
      }
    }
    EXPECT_EQ(giou_loss(rc.preds, rc.targets, cfg), 0.0);
    EXPECT_EQ(objectness_loss(rc.preds, rc.targets, cfg), 0.0);
    EXPECT_EQ(classification_loss(rc.preds, rc.targets, cfg), 0.0);
  }
}
