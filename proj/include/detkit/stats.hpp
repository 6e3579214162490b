#pragma once

// One-way fixed-effects ANOVA, pooled two-sample t tests and descriptive
// statistics over grouped observations.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "detkit/error.hpp"
#include "detkit/special_functions.hpp"

namespace detkit {

struct ObservationGroup {
  std::string label;
  std::vector<double> values;
};

struct ObservationTable {
  std::string response;
  std::string units;
  std::vector<ObservationGroup> groups;

  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.values.size();
    return n;
  }

  /// At least two groups, each with at least two finite observations.
  void validate() const {
    if (groups.size() < 2)
      throw DomainError(fmt::format("response '{}': at least 2 groups required, found {}",
                                    response, groups.size()));
    for (const auto& g : groups) {
      if (g.values.size() < 2)
        throw DomainError(fmt::format("response '{}': group '{}' has {} observation(s), need >= 2",
                                      response, g.label, g.values.size()));
      for (double v : g.values)
        if (!std::isfinite(v))
          throw DomainError(fmt::format("response '{}': non-finite observation in group '{}'",
                                        response, g.label));
    }
  }
};

struct Descriptives {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> sd;  ///< sample SD (n - 1); empty when n < 2
};

inline Descriptives describe(std::span<const double> sample) {
  Descriptives d;
  d.n = sample.size();
  if (sample.empty()) throw DomainError("describe of an empty sample");
  double sum = 0.0;
  for (double v : sample) sum += v;
  d.mean = sum / double(d.n);
  if (d.n >= 2) {
    double ss = 0.0;
    for (double v : sample) ss += (v - d.mean) * (v - d.mean);
    d.sd = std::sqrt(ss / double(d.n - 1));
  }
  return d;
}

struct AnovaResult {
  double grand_mean = 0.0;
  std::vector<double> group_means;
  std::vector<std::size_t> group_sizes;
  std::vector<double> effects;                 ///< group mean - grand mean
  std::vector<std::vector<double>> residuals;  ///< observation - group mean
  double ss_between = 0.0;
  double ss_within = 0.0;
  double ss_total = 0.0;
  int df_between = 0;
  int df_within = 0;
  double ms_between = 0.0;
  double ms_within = 0.0;
  /// Empty when the within-group sum of squares is zero: the F ratio is then
  /// undefined (or infinite) and the result is flagged instead.
  std::optional<double> f_ratio;
  std::optional<double> p_value;
  bool degenerate = false;
};

/// Least-squares fit of Y_ij = mu + alpha_i + e_ij with sum_i n_i alpha_i = 0.
inline AnovaResult anova_oneway(const ObservationTable& table) {
  table.validate();
  AnovaResult r;
  const std::size_t k = table.groups.size();
  const std::size_t N = table.total_count();
  double total = 0.0;
  for (const auto& g : table.groups) {
    double s = 0.0;
    for (double v : g.values) s += v;
    total += s;
    r.group_sizes.push_back(g.values.size());
    r.group_means.push_back(s / double(g.values.size()));
  }
  r.grand_mean = total / double(N);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& g = table.groups[i];
    const double effect = r.group_means[i] - r.grand_mean;
    r.effects.push_back(effect);
    r.ss_between += double(g.values.size()) * effect * effect;
    std::vector<double> res;
    res.reserve(g.values.size());
    for (double v : g.values) {
      res.push_back(v - r.group_means[i]);
      r.ss_within += res.back() * res.back();
      r.ss_total += (v - r.grand_mean) * (v - r.grand_mean);
    }
    r.residuals.push_back(std::move(res));
  }
  r.df_between = int(k - 1);
  r.df_within = int(N - k);
  r.ms_between = r.ss_between / r.df_between;
  r.ms_within = r.ss_within / r.df_within;
  if (r.ss_within <= 1e-14 * r.ss_total || r.ss_within == 0.0) {
    r.degenerate = true;
    return r;
  }
  r.f_ratio = r.ms_between / r.ms_within;
  r.p_value = f_sf(*r.f_ratio, r.df_between, r.df_within);
  return r;
}

struct TTestResult {
  std::string group_a;
  std::string group_b;
  double mean_difference = 0.0;  ///< mean(a) - mean(b)
  int df = 0;
  std::optional<double> t;        ///< empty when the pooled variance is zero
  std::optional<double> p_value;  ///< two-sided
  bool degenerate = false;
};

/// Pooled-variance two-sample t test.
inline TTestResult t_test(const ObservationGroup& a, const ObservationGroup& b) {
  if (a.values.size() < 2 || b.values.size() < 2)
    throw DomainError(fmt::format("t test of '{}' vs '{}' needs >= 2 observations per group",
                                  a.label, b.label));
  const auto da = describe(a.values);
  const auto db = describe(b.values);
  TTestResult r;
  r.group_a = a.label;
  r.group_b = b.label;
  r.mean_difference = da.mean - db.mean;
  const double na = double(da.n), nb = double(db.n);
  r.df = int(da.n + db.n - 2);
  const double pooled =
      ((na - 1.0) * *da.sd * *da.sd + (nb - 1.0) * *db.sd * *db.sd) / double(r.df);
  if (!(pooled > 0.0)) {
    r.degenerate = true;
    return r;
  }
  r.t = r.mean_difference / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  r.p_value = t_two_sided_p(*r.t, r.df);
  return r;
}

/// t test for every unordered pair of groups, in table order (0,1), (0,2), ...
inline std::vector<TTestResult> t_test_pairwise(const ObservationTable& table) {
  if (table.groups.size() < 2)
    throw DomainError(fmt::format("response '{}': pairwise t tests need >= 2 groups", table.response));
  std::vector<TTestResult> out;
  for (std::size_t i = 0; i < table.groups.size(); ++i)
    for (std::size_t j = i + 1; j < table.groups.size(); ++j)
      out.push_back(t_test(table.groups[i], table.groups[j]));
  return out;
}

}  // namespace detkit
