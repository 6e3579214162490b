#pragma once

// Reference YOLO loss terms over explicit (cell, anchor) assignments, and the
// swish / hard-swish activations. Evaluation-side only: no gradients.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "detkit/error.hpp"
#include "detkit/geometry.hpp"

namespace detkit {

inline double swish(double x) { return x / (1.0 + std::exp(-x)); }

inline double relu6(double x) { return std::min(std::max(x, 0.0), 6.0); }

inline double hard_swish(double x) { return x * relu6(x + 3.0) / 6.0; }

struct LossConfig {
  double lambda_coord = 1.0;
  double lambda_noobj = 1.0;
  int grid_size = 1;          ///< s; the grid has s * s cells
  int anchors_per_scale = 3;  ///< B

  void validate() const {
    if (!(lambda_coord >= 0.0) || !(lambda_noobj >= 0.0))
      throw ConfigError("loss weights must be non-negative");
    if (grid_size < 1 || anchors_per_scale < 1)
      throw ConfigError("grid_size and anchors_per_scale must be >= 1");
  }
};

struct CellPrediction {
  int cell = 0;
  int anchor = 0;
  BoundingBox box;
  double objectness = 0.0;
  std::vector<double> class_scores;
};

struct CellTarget {
  int cell = 0;
  int anchor = 0;
  bool has_object = false;
  std::optional<BoundingBox> truth_box;
  double objectness = 0.0;
  std::vector<double> class_distribution;
};

namespace loss_detail {

inline void check_aligned(std::span<const CellPrediction> preds, std::span<const CellTarget> targets,
                          const LossConfig& cfg) {
  cfg.validate();
  if (preds.size() != targets.size())
    throw ContractError(fmt::format("{} predictions vs {} targets", preds.size(), targets.size()));
  const long cells = long(cfg.grid_size) * cfg.grid_size;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (preds[k].cell != targets[k].cell || preds[k].anchor != targets[k].anchor)
      throw ContractError(fmt::format("record {}: prediction (cell {}, anchor {}) misaligned with "
                                      "target (cell {}, anchor {})",
                                      k, preds[k].cell, preds[k].anchor, targets[k].cell,
                                      targets[k].anchor));
    if (preds[k].cell < 0 || preds[k].cell >= cells || preds[k].anchor < 0 ||
        preds[k].anchor >= cfg.anchors_per_scale)
      throw ContractError(fmt::format("record {}: cell/anchor index out of range", k));
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    bool ok = in_unit(preds[k].objectness) && in_unit(targets[k].objectness);
    for (double v : preds[k].class_scores) ok = ok && in_unit(v);
    for (double v : targets[k].class_distribution) ok = ok && in_unit(v);
    if (!ok) throw ContractError(fmt::format("record {}: objectness or class score outside [0,1]", k));
  }
}

inline double squared(double v) { return v * v; }

}  // namespace loss_detail

/// lambda_coord * sum over object cells of (1 - GIoU(pred, truth)).
inline double giou_loss(std::span<const CellPrediction> preds, std::span<const CellTarget> targets,
                        const LossConfig& cfg) {
  loss_detail::check_aligned(preds, targets, cfg);
  double sum = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (!targets[k].has_object) continue;
    if (!targets[k].truth_box)
      throw ContractError(fmt::format("record {}: object target without a truth box", k));
    sum += 1.0 - giou(preds[k].box, *targets[k].truth_box);
  }
  return cfg.lambda_coord * sum;
}

/// Squared objectness error over object cells plus lambda_noobj times the same
/// over no-object cells.
inline double objectness_loss(std::span<const CellPrediction> preds,
                              std::span<const CellTarget> targets, const LossConfig& cfg) {
  loss_detail::check_aligned(preds, targets, cfg);
  double obj = 0.0, noobj = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const double e = loss_detail::squared(preds[k].objectness - targets[k].objectness);
    (targets[k].has_object ? obj : noobj) += e;
  }
  return obj + cfg.lambda_noobj * noobj;
}

/// Squared class-score error, summed over classes and object cells only.
inline double classification_loss(std::span<const CellPrediction> preds,
                                  std::span<const CellTarget> targets, const LossConfig& cfg) {
  loss_detail::check_aligned(preds, targets, cfg);
  double sum = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (preds[k].class_scores.size() != targets[k].class_distribution.size())
      throw ContractError(fmt::format("record {}: {} class scores vs {} target classes", k,
                                      preds[k].class_scores.size(),
                                      targets[k].class_distribution.size()));
    if (!targets[k].has_object) continue;
    for (std::size_t c = 0; c < preds[k].class_scores.size(); ++c)
      sum += loss_detail::squared(preds[k].class_scores[c] - targets[k].class_distribution[c]);
  }
  return sum;
}

struct LossFixture {
  std::vector<CellPrediction> predictions;
  std::vector<CellTarget> targets;
};

/// Reads a JSON array of
/// {cell, anchor, obj, pred_box, truth_box, C, C_hat, p, p_hat} records,
/// boxes given as [cx, cy, w, h]. truth_box may be null or absent when obj is
/// false.
inline LossFixture parse_loss_fixture(const nlohmann::json& doc) {
  if (!doc.is_array()) throw ParseError("loss fixture must be a JSON array", 0);
  auto box_from = [](const nlohmann::json& j, std::size_t rec) {
    if (!j.is_array() || j.size() != 4)
      throw ParseError(fmt::format("record {}: box must be [cx, cy, w, h]", rec), 0);
    return BoundingBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                       j[3].get<double>()};
  };
  LossFixture fx;
  std::size_t rec = 0;
  try {
    for (const auto& r : doc) {
      CellPrediction p;
      CellTarget t;
      p.cell = t.cell = r.at("cell").get<int>();
      p.anchor = t.anchor = r.at("anchor").get<int>();
      t.has_object = r.at("obj").get<bool>();
      p.box = box_from(r.at("pred_box"), rec);
      if (r.contains("truth_box") && !r["truth_box"].is_null()) t.truth_box = box_from(r["truth_box"], rec);
      p.objectness = r.at("C").get<double>();
      t.objectness = r.at("C_hat").get<double>();
      p.class_scores = r.at("p").get<std::vector<double>>();
      t.class_distribution = r.at("p_hat").get<std::vector<double>>();
      fx.predictions.push_back(std::move(p));
      fx.targets.push_back(std::move(t));
      ++rec;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("record {}: {}", rec, e.what()), 0);
  }
  return fx;
}

}  // namespace detkit
