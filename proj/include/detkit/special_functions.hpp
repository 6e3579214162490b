#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "detkit/error.hpp"

namespace detkit {

namespace special_detail {

inline constexpr double kCfTolerance = 1e-14;
inline constexpr int kCfMaxIterations = 300;
inline constexpr double kTiny = 1e-300;

/// Continued fraction for I_x(a,b) evaluated with the modified Lentz method.
inline double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kCfMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kCfTolerance) return h;
  }
  throw DomainError(fmt::format("incomplete beta continued fraction did not converge "
                                "(a={}, b={}, x={})", a, b, x));
}

}  // namespace special_detail

/// Regularized incomplete beta function I_x(a, b). Uses the continued fraction
/// directly for x < (a+1)/(a+b+2) and the symmetry I_x(a,b) = 1 - I_{1-x}(b,a)
/// otherwise, which keeps the fraction in its fast-converging region.
inline double reg_inc_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0) || !(a > 0.0) || !(b > 0.0) || !std::isfinite(a) ||
      !std::isfinite(b))
    throw DomainError(fmt::format("reg_inc_beta domain: x={} a={} b={}", x, a, b));
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  double v;
  if (x < (a + 1.0) / (a + b + 2.0))
    v = front * special_detail::beta_continued_fraction(a, b, x) / a;
  else
    v = 1.0 - front * special_detail::beta_continued_fraction(b, a, 1.0 - x) / b;
  return std::clamp(v, 0.0, 1.0);
}

/// Upper tail Prob(F > f) of the F distribution with (d1, d2) degrees of
/// freedom.
inline double f_sf(double f, double d1, double d2) {
  if (!(f >= 0.0) || !(d1 > 0.0) || !(d2 > 0.0) || !std::isfinite(f))
    throw DomainError(fmt::format("f_sf domain: f={} d1={} d2={}", f, d1, d2));
  if (f == 0.0) return 1.0;
  return reg_inc_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0);
}

/// Two-sided Student t tail probability Prob(|T| > |t|).
inline double t_two_sided_p(double t, double df) {
  if (!(df > 0.0) || !std::isfinite(t))
    throw DomainError(fmt::format("t_two_sided_p domain: t={} df={}", t, df));
  if (t == 0.0) return 1.0;
  return reg_inc_beta(df / (df + t * t), df / 2.0, 0.5);
}

}  // namespace detkit
