#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "detkit/annotations.hpp"
#include "detkit/error.hpp"
#include "detkit/geometry.hpp"

namespace detkit {

struct ClassTally {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  ClassTally& operator+=(const ClassTally& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend ClassTally operator+(ClassTally a, const ClassTally& b) { return a += b; }
  friend bool operator==(const ClassTally&, const ClassTally&) = default;
};

using ClassTallies = std::map<ClassId, ClassTally>;

struct MatchedPair {
  std::size_t detection = 0;  ///< index into the detection list
  std::size_t truth = 0;      ///< index into the truth list
  double iou = 0.0;
  ClassId detection_label = 0;
  ClassId truth_label = 0;
};

struct Unmatched {
  std::size_t index = 0;
  ClassId label = 0;
};

/// Result of matching one image's detections against its ground truth.
///
/// Invariants: every detection and every truth index appears in at most one
/// pair; tallies[c].tp equals the number of same-class pairs of class c.
struct MatchReport {
  ClassTallies tallies;
  std::vector<MatchedPair> pairs;
  std::vector<Unmatched> unmatched_detections;
  std::vector<Unmatched> unmatched_truths;
  /// Per detection (input order): true if it is a same-class match.
  std::vector<bool> detection_is_tp;
  double iou_threshold = 0.5;
  bool cross_class = false;

  ClassTally tally(ClassId c) const {
    auto it = tallies.find(c);
    return it == tallies.end() ? ClassTally{} : it->second;
  }
  ClassTally total() const {
    ClassTally t;
    for (const auto& [c, v] : tallies) t += v;
    return t;
  }
};

/// Detection indices ordered by descending confidence, ties by input order.
inline std::vector<std::size_t> confidence_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

/// Greedy one-to-one matching. Detections are visited by descending
/// confidence; each claims the unclaimed truth of highest IoU (ties: lowest
/// truth index) provided IoU >= threshold. Candidate truths are restricted to
/// the detection's class unless `cross_class` is set, in which case any class
/// may be claimed and a cross-class pair counts as FP for the predicted class
/// and FN for the true class.
inline MatchReport match(std::span<const Detection> dets, std::span<const GroundTruthObject> truths,
                         double iou_threshold, bool cross_class = false) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw DomainError("iou_threshold must lie in (0, 1]");
  MatchReport r;
  r.iou_threshold = iou_threshold;
  r.cross_class = cross_class;
  r.detection_is_tp.assign(dets.size(), false);
  std::vector<bool> claimed(truths.size(), false);
  std::vector<bool> det_matched(dets.size(), false);

  for (std::size_t di : confidence_order(dets)) {
    const Detection& d = dets[di];
    double best = -1.0;
    std::size_t best_t = truths.size();
    for (std::size_t ti = 0; ti < truths.size(); ++ti) {
      if (claimed[ti]) continue;
      if (!cross_class && truths[ti].label != d.label) continue;
      const double v = iou(d.box, truths[ti].box);
      if (v > best) {
        best = v;
        best_t = ti;
      }
    }
    if (best_t < truths.size() && best >= iou_threshold) {
      claimed[best_t] = true;
      det_matched[di] = true;
      r.pairs.push_back({di, best_t, best, d.label, truths[best_t].label});
    }
  }

  for (const auto& d : dets) r.tallies[d.label];
  for (const auto& t : truths) r.tallies[t.label];
  for (const auto& p : r.pairs) {
    if (p.detection_label == p.truth_label) {
      ++r.tallies[p.detection_label].tp;
      r.detection_is_tp[p.detection] = true;
    } else {
      ++r.tallies[p.detection_label].fp;
      ++r.tallies[p.truth_label].fn;
    }
  }
  for (std::size_t di = 0; di < dets.size(); ++di)
    if (!det_matched[di]) {
      ++r.tallies[dets[di].label].fp;
      r.unmatched_detections.push_back({di, dets[di].label});
    }
  for (std::size_t ti = 0; ti < truths.size(); ++ti)
    if (!claimed[ti]) {
      ++r.tallies[truths[ti].label].fn;
      r.unmatched_truths.push_back({ti, truths[ti].label});
    }
  return r;
}

/// Sum of per-class tallies over many reports. Integer addition, so the
/// result does not depend on report order.
inline ClassTallies aggregate_tallies(std::span<const MatchReport> reports) {
  ClassTallies out;
  for (const auto& r : reports)
    for (const auto& [c, t] : r.tallies) out[c] += t;
  return out;
}

}  // namespace detkit
