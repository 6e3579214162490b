#pragma once

// Desirability-based multi-response selection: every response is mapped onto
// [0, 1] by a piecewise-linear goal, the mapped values are combined by a
// weighted geometric mean, and candidates are ranked by the result.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "detkit/error.hpp"

namespace detkit {

enum class GoalDirection { kLargerIsBetter, kSmallerIsBetter, kTargetIsBest };

inline const char* to_string(GoalDirection d) {
  switch (d) {
    case GoalDirection::kLargerIsBetter: return "larger-is-better";
    case GoalDirection::kSmallerIsBetter: return "smaller-is-better";
    case GoalDirection::kTargetIsBest: return "target-is-best";
  }
  return "?";
}

inline GoalDirection parse_goal_direction(const std::string& s) {
  if (s == "larger-is-better" || s == "maximize") return GoalDirection::kLargerIsBetter;
  if (s == "smaller-is-better" || s == "minimize") return GoalDirection::kSmallerIsBetter;
  if (s == "target-is-best" || s == "target") return GoalDirection::kTargetIsBest;
  throw ConfigError(fmt::format("unknown goal direction '{}'", s));
}

/// One-sided goals map low -> 0, middle -> 0.5, high -> 1. For
/// smaller-is-better the breakpoints are numerically descending. A
/// target-is-best goal maps low -> 0, middle (the target) -> 1, high -> 0.
struct ResponseGoal {
  std::string name;
  GoalDirection direction = GoalDirection::kLargerIsBetter;
  double low = 0.0;
  double middle = 0.5;
  double high = 1.0;
  double weight = 1.0;

  void validate() const {
    if (!std::isfinite(low) || !std::isfinite(middle) || !std::isfinite(high))
      throw ConfigError(fmt::format("goal '{}': breakpoints must be finite", name));
    const bool ascending = low < middle && middle < high;
    const bool descending = low > middle && middle > high;
    switch (direction) {
      case GoalDirection::kLargerIsBetter:
      case GoalDirection::kTargetIsBest:
        if (!ascending)
          throw ConfigError(fmt::format("goal '{}': need low < middle < high, got {} {} {}", name,
                                        low, middle, high));
        break;
      case GoalDirection::kSmallerIsBetter:
        if (!descending)
          throw ConfigError(fmt::format("goal '{}': smaller-is-better needs low > middle > high, "
                                        "got {} {} {}", name, low, middle, high));
        break;
    }
    if (!(weight > 0.0) || !std::isfinite(weight))
      throw ConfigError(fmt::format("goal '{}': weight must be positive", name));
  }
};

namespace desirability_detail {
// Linear interpolation of y on [x0, x1], clamped outside.
inline double ramp(double v, double x0, double y0, double x1, double y1) {
  const double t = (v - x0) / (x1 - x0);
  return y0 + (y1 - y0) * std::clamp(t, 0.0, 1.0);
}
}  // namespace desirability_detail

inline double desirability_of(double value, const ResponseGoal& goal) {
  using desirability_detail::ramp;
  goal.validate();
  if (!std::isfinite(value))
    throw DomainError(fmt::format("goal '{}': non-finite response value", goal.name));
  double d;
  if (goal.direction == GoalDirection::kTargetIsBest) {
    d = value <= goal.middle ? ramp(value, goal.low, 0.0, goal.middle, 1.0)
                             : ramp(value, goal.middle, 1.0, goal.high, 0.0);
  } else {
    // Position along the low -> high axis; works for either orientation.
    const bool before_middle = (goal.direction == GoalDirection::kLargerIsBetter)
                                   ? value <= goal.middle
                                   : value >= goal.middle;
    d = before_middle ? ramp(value, goal.low, 0.0, goal.middle, 0.5)
                      : ramp(value, goal.middle, 0.5, goal.high, 1.0);
  }
  return std::clamp(d, 0.0, 1.0);
}

struct Candidate {
  std::string label;
  std::map<std::string, double> responses;
};

struct DesirabilityProfile {
  std::vector<ResponseGoal> goals;

  void validate() const {
    if (goals.empty()) throw ConfigError("desirability profile has no goals");
    for (std::size_t i = 0; i < goals.size(); ++i) {
      goals[i].validate();
      for (std::size_t j = 0; j < i; ++j)
        if (goals[j].name == goals[i].name)
          throw ConfigError(fmt::format("duplicate goal '{}'", goals[i].name));
    }
  }
};

/// Per-goal desirabilities in profile order.
inline std::vector<double> individual_desirabilities(const Candidate& c,
                                                     const DesirabilityProfile& profile) {
  profile.validate();
  std::vector<double> d;
  d.reserve(profile.goals.size());
  for (const auto& g : profile.goals) {
    auto it = c.responses.find(g.name);
    if (it == c.responses.end())
      throw DomainError(fmt::format("candidate '{}' has no response '{}'", c.label, g.name));
    d.push_back(desirability_of(it->second, g));
  }
  return d;
}

/// Weighted geometric mean (prod d_k^w_k)^(1 / sum w_k); 0 if any d_k is 0.
inline double combine_desirabilities(const std::vector<double>& d, const DesirabilityProfile& profile) {
  double log_sum = 0.0, weight_sum = 0.0;
  bool all_equal = true;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (d[k] <= 0.0) return 0.0;
    log_sum += profile.goals[k].weight * std::log(d[k]);
    weight_sum += profile.goals[k].weight;
    all_equal = all_equal && d[k] == d[0];
  }
  if (all_equal) return d[0];
  return std::clamp(std::exp(log_sum / weight_sum), 0.0, 1.0);
}

inline double overall_desirability(const Candidate& c, const DesirabilityProfile& profile) {
  return combine_desirabilities(individual_desirabilities(c, profile), profile);
}

struct RankedCandidate {
  std::size_t rank = 0;  ///< 1-based
  std::string label;
  double overall = 0.0;
  std::vector<double> individual;
  bool tied = false;  ///< shares its D with a neighbour; order came from the label
};

/// Candidates sorted by D descending, ties by label ascending and flagged.
/// Over a finite candidate set this argmax is exact.
inline std::vector<RankedCandidate> select_best(const std::vector<Candidate>& candidates,
                                                const DesirabilityProfile& profile) {
  if (candidates.empty()) throw DomainError("select_best needs at least one candidate");
  profile.validate();
  std::vector<RankedCandidate> out;
  for (const auto& c : candidates) {
    RankedCandidate r;
    r.label = c.label;
    r.individual = individual_desirabilities(c, profile);
    r.overall = combine_desirabilities(r.individual, profile);
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.overall != b.overall) return a.overall > b.overall;
    return a.label < b.label;
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].rank = i + 1;
    if ((i > 0 && out[i - 1].overall == out[i].overall) ||
        (i + 1 < out.size() && out[i + 1].overall == out[i].overall))
      out[i].tied = true;
  }
  return out;
}

/// Goals used for model selection: mAP@50 and both class accuracies with
/// breakpoints 0.8 / 0.85 / 1.0, inference speed (FPS) with 35 / 85 / 142.
inline DesirabilityProfile reference_profile() {
  DesirabilityProfile p;
  p.goals.push_back({"map50", GoalDirection::kLargerIsBetter, 0.80, 0.85, 1.0, 1.0});
  p.goals.push_back({"accuracy_wb", GoalDirection::kLargerIsBetter, 0.80, 0.85, 1.0, 1.0});
  p.goals.push_back({"accuracy_bb", GoalDirection::kLargerIsBetter, 0.80, 0.85, 1.0, 1.0});
  p.goals.push_back({"speed_fps", GoalDirection::kLargerIsBetter, 35.0, 85.0, 142.0, 1.0});
  return p;
}

}  // namespace detkit
