#pragma once

// Shapiro-Wilk W test using Royston's (1995) AS R94 approximations for the
// coefficients and for the normalizing transformation of W.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "detkit/error.hpp"

namespace detkit {

struct SWResult {
  double w = 0.0;
  double p_value = 0.0;
  std::size_t n = 0;
};

namespace sw_detail {

template <std::size_t N>
double poly(const double (&c)[N], double x) {
  double r = c[N - 1];
  for (std::size_t i = N - 1; i-- > 0;) r = r * x + c[i];
  return r;
}

inline constexpr double kC1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
inline constexpr double kC2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
inline constexpr double kC3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
inline constexpr double kC4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
inline constexpr double kC5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
inline constexpr double kC6[] = {-0.4803, -0.082676, 0.0030302};
inline constexpr double kG[] = {-2.273, 0.459};

/// Upper half of the antisymmetric coefficient vector, largest first;
/// normalized so that 2 * sum(a_i^2) = 1.
inline std::vector<double> coefficients(std::size_t n) {
  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
    return a;
  }
  const boost::math::normal_distribution<double> std_normal;
  const double an25 = double(n) + 0.25;
  std::vector<double> m(half);
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    m[i] = boost::math::quantile(std_normal, (double(i + 1) - 0.375) / an25);
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(double(n));
  const double a1 = poly(kC1, rsn) - m[0] / ssumm2;
  std::size_t first;
  double fac;
  if (n > 5) {
    first = 2;
    const double a2 = -m[1] / ssumm2 + poly(kC2, rsn);
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                    (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
    a[1] = a2;
  } else {
    first = 1;
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
  }
  a[0] = a1;
  for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  return a;
}

}  // namespace sw_detail

inline SWResult shapiro_wilk(std::span<const double> sample) {
  using namespace sw_detail;
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000)
    throw DomainError(fmt::format("shapiro_wilk needs 3 <= n <= 5000, got n = {}", n));
  std::vector<double> x(sample.begin(), sample.end());
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError("shapiro_wilk: non-finite observation");
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 0.0) || range < 1e-19 * std::max(1.0, std::fabs(x.front())))
    throw DomainError("shapiro_wilk: constant sample, W is undefined");

  const auto a = coefficients(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(n);
  double ssq = 0.0;
  for (double v : x) ssq += (v - mean) * (v - mean);
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  double w = std::min(1.0, num * num / ssq);

  SWResult r;
  r.n = n;
  r.w = w;
  if (n == 3) {
    // Exact distribution for n = 3: W is bounded below by 3/4.
    constexpr double kSixOverPi = 1.90985931710274;
    constexpr double kAsinSqrtThreeQuarters = 1.04719755119660;
    r.w = w = std::max(w, 0.75);
    r.p_value = std::clamp(kSixOverPi * (std::asin(std::sqrt(w)) - kAsinSqrtThreeQuarters), 0.0, 1.0);
    return r;
  }
  const double w1 = std::log(1.0 - w);
  double mu, sigma, z;
  if (n <= 11) {
    const double gamma = poly(kG, double(n));
    if (w1 >= gamma) {
      r.p_value = 1e-99;
      return r;
    }
    z = -std::log(gamma - w1);
    mu = poly(kC3, double(n));
    sigma = std::exp(poly(kC4, double(n)));
  } else {
    const double ln = std::log(double(n));
    z = w1;
    mu = poly(kC5, ln);
    sigma = std::exp(poly(kC6, ln));
  }
  const boost::math::normal_distribution<double> dist(mu, sigma);
  r.p_value = std::clamp(boost::math::cdf(boost::math::complement(dist, z)), 0.0, 1.0);
  return r;
}

}  // namespace detkit
