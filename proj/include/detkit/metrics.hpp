#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "detkit/annotations.hpp"
#include "detkit/error.hpp"
#include "detkit/matching.hpp"

namespace detkit {

/// Ratio metric. When the denominator is zero the value is 0 and `degenerate`
/// is set.
struct Metric {
  double value = 0.0;
  bool degenerate = false;
};

namespace metrics_detail {
inline Metric ratio(double num, double den) {
  if (!(den > 0.0)) return {0.0, true};
  return {num / den, false};
}
}  // namespace metrics_detail

inline Metric precision(const ClassTally& t) {
  return metrics_detail::ratio(double(t.tp), double(t.tp + t.fp));
}

inline Metric recall(const ClassTally& t) {
  return metrics_detail::ratio(double(t.tp), double(t.tp + t.fn));
}

inline Metric f1(const ClassTally& t) {
  const Metric p = precision(t);
  const Metric r = recall(t);
  Metric out = metrics_detail::ratio(2.0 * p.value * r.value, p.value + r.value);
  out.degenerate = out.degenerate || p.degenerate || r.degenerate;
  return out;
}

/// (TP + TN) / (TP + TN + FP + FN) with TN taken as 0: true negatives are not
/// countable for open-scene detection.
inline Metric detection_accuracy(const ClassTally& t) {
  return metrics_detail::ratio(double(t.tp), double(t.tp + t.fp + t.fn));
}

inline Metric precision(const MatchReport& r) { return precision(r.total()); }
inline Metric recall(const MatchReport& r) { return recall(r.total()); }
inline Metric f1(const MatchReport& r) { return f1(r.total()); }
inline Metric detection_accuracy(const MatchReport& r) { return detection_accuracy(r.total()); }

/// Detections and ground truth of one image.
struct ImageEval {
  std::vector<Detection> detections;
  std::vector<GroundTruthObject> truths;
};

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0;  ///< cumulative
  std::size_t fp = 0;  ///< cumulative
};

/// Precision/recall at each distinct confidence, thresholds strictly
/// decreasing along `points`.
struct PRCurve {
  ClassId label = 0;
  std::size_t truth_count = 0;
  std::vector<PRPoint> points;
};

/// Sweeps every distinct confidence value of class `label` detections across
/// the whole set, highest first. Detections sharing a confidence enter in a
/// single step. Matching is per image and per class, so the TP/FP status of
/// each detection equals its status when thresholding at its own confidence.
inline PRCurve pr_curve(std::span<const ImageEval> images, ClassId label, double iou_threshold) {
  struct Scored {
    double confidence;
    bool tp;
  };
  std::vector<Scored> scored;
  PRCurve curve;
  curve.label = label;
  for (const auto& img : images) {
    std::vector<Detection> dets;
    std::vector<GroundTruthObject> truths;
    for (const auto& d : img.detections)
      if (d.label == label) dets.push_back(d);
    for (const auto& t : img.truths)
      if (t.label == label) truths.push_back(t);
    curve.truth_count += truths.size();
    const MatchReport r = match(dets, truths, iou_threshold);
    for (std::size_t i = 0; i < dets.size(); ++i)
      scored.push_back({dets[i].confidence, r.detection_is_tp[i]});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) { return a.confidence > b.confidence; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size();) {
    const double c = scored[i].confidence;
    for (; i < scored.size() && scored[i].confidence == c; ++i) (scored[i].tp ? tp : fp)++;
    PRPoint p;
    p.threshold = c;
    p.tp = tp;
    p.fp = fp;
    p.precision = double(tp) / double(tp + fp);
    p.recall = curve.truth_count > 0 ? double(tp) / double(curve.truth_count) : 0.0;
    curve.points.push_back(p);
  }
  return curve;
}

enum class ApInterpolation {
  kAllPoint,    ///< area under the monotone precision envelope
  kElevenPoint, ///< mean envelope precision at recall 0, 0.1, ..., 1
};

/// Average precision of a curve. All-point form: sum over sweep steps of the
/// recall increment times the maximum precision at any recall >= that step's
/// recall. Empty curves give 0.
inline double average_precision(const PRCurve& curve,
                                ApInterpolation mode = ApInterpolation::kAllPoint) {
  const auto& pts = curve.points;
  if (pts.empty() || curve.truth_count == 0) return 0.0;
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t k = pts.size(); k-- > 0;) {
    running = std::max(running, pts[k].precision);
    envelope[k] = running;
  }
  if (mode == ApInterpolation::kElevenPoint) {
    double sum = 0.0;
    for (int s = 0; s <= 10; ++s) {
      const double level = s / 10.0;
      double best = 0.0;
      for (std::size_t k = 0; k < pts.size(); ++k)
        if (pts[k].recall >= level) {
          best = envelope[k];
          break;
        }
      sum += best;
    }
    return sum / 11.0;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    ap += (pts[k].recall - prev_recall) * envelope[k];
    prev_recall = pts[k].recall;
  }
  return std::clamp(ap, 0.0, 1.0);
}

/// Arithmetic mean of per-class AP values.
inline double mean_average_precision(std::span<const double> aps) {
  if (aps.empty()) throw DomainError("mean_average_precision needs at least one class AP");
  double sum = 0.0;
  for (double a : aps) sum += a;
  return sum / double(aps.size());
}

/// (N+1) x (N+1) counts; rows are predicted class, columns are true class, and
/// index N is background.
struct ConfusionMatrix {
  std::vector<ClassLabel> classes;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t background() const { return classes.size(); }
  std::size_t at(std::size_t predicted, std::size_t truth) const { return counts[predicted][truth]; }
  std::size_t sum() const {
    std::size_t s = 0;
    for (const auto& row : counts)
      for (auto v : row) s += v;
    return s;
  }
};

inline ConfusionMatrix confusion_matrix(std::span<const MatchReport> reports,
                                        const ClassRegistry& registry) {
  ConfusionMatrix cm;
  cm.classes = registry.labels();
  const std::size_t n = registry.size() + 1;
  cm.counts.assign(n, std::vector<std::size_t>(n, 0));
  const std::size_t bg = registry.size();
  for (const auto& r : reports) {
    if (!r.cross_class)
      throw ContractError("confusion_matrix requires reports matched with cross-class checking");
    for (const auto& p : r.pairs)
      ++cm.counts[registry.index_of(p.detection_label)][registry.index_of(p.truth_label)];
    for (const auto& u : r.unmatched_detections) ++cm.counts[registry.index_of(u.label)][bg];
    for (const auto& u : r.unmatched_truths) ++cm.counts[bg][registry.index_of(u.label)];
  }
  return cm;
}

}  // namespace detkit
