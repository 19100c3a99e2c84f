#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "distractnet/error.hpp"

namespace distractnet {

/// Fraction of exact matches.
inline double accuracy(std::span<const int> pred, std::span<const int> truth) {
  detail::require(pred.size() == truth.size(),
                  "accuracy: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(truth.size()) + " labels");
  detail::require(!pred.empty(), "accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

inline double mean(std::span<const double> x) {
  detail::require(!x.empty(), "mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased (n - 1) sample variance.
inline double sample_variance(std::span<const double> x) {
  detail::require(x.size() >= 2, "sample variance needs at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

inline double sample_std(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericalError("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  detail::require(a > 0.0 && b > 0.0, "incomplete beta needs a, b > 0");
  detail::require(x >= 0.0 && x <= 1.0, "incomplete beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double lnfront = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(lnfront);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
  return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

/// Two-tailed p-value P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided(double t, double df) {
  detail::require(df > 0.0, "degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

/// Lower-tail CDF of Student's t.
inline double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided(t, df);
  return t >= 0.0 ? 1.0 - tail : tail;
}

namespace detail {

/// True when every value equals the others up to rounding. Sample variances of
/// such data come out as a few ulps rather than exactly zero.
inline bool numerically_constant(std::span<const double> x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double scale = std::max(std::abs(*lo), std::abs(*hi));
  return *hi - *lo <= 8.0 * std::numeric_limits<double>::epsilon() * scale;
}

}  // namespace detail

struct TestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  /// Both samples (or all differences) had zero variance; p is 1 for a zero
  /// mean difference and 0 otherwise.
  bool zero_variance = false;
};

/// Two-tailed paired t-test on a - b with n - 1 degrees of freedom.
inline TestResult paired_test(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "paired test needs equal-length samples");
  detail::require(a.size() >= 2, "paired test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  TestResult r;
  r.df = static_cast<double>(d.size() - 1);
  const double md = mean(d);
  const double var = sample_variance(d);
  if (detail::numerically_constant(d)) {
    r.zero_variance = true;
    r.t = md == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), md);
    r.p = md == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = md / std::sqrt(var / static_cast<double>(d.size()));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

/// Two-tailed Welch (unequal variance) two-sample t-test.
inline TestResult welch_test(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() >= 2 && b.size() >= 2, "Welch test needs at least two values per group");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = sample_variance(a) / na, vb = sample_variance(b) / nb;
  const double diff = mean(a) - mean(b);
  TestResult r;
  if (detail::numerically_constant(a) && detail::numerically_constant(b)) {
    r.zero_variance = true;
    r.df = na + nb - 2.0;
    std::vector<double> both(a.begin(), a.end());
    both.insert(both.end(), b.begin(), b.end());
    const bool equal = detail::numerically_constant(both);
    r.t = equal ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p = equal ? 1.0 : 0.0;
    return r;
  }
  r.t = diff / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

/// Least-squares slope of y on x with a two-tailed t-test against zero slope
/// (n - 2 degrees of freedom).
inline TestResult slope_test(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), "slope test needs equal-length samples");
  detail::require(x.size() >= 3, "slope test needs at least three points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  detail::require(sxx > 0.0, "slope test needs at least two distinct x values");
  const double slope = sxy / sxx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - my - slope * (x[i] - mx);
    sse += e * e;
  }
  TestResult r;
  r.df = static_cast<double>(x.size() - 2);
  if (sse == 0.0) {
    r.zero_variance = true;
    r.t = slope == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), slope);
    r.p = slope == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = slope / std::sqrt(sse / r.df / sxx);
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

inline double bonferroni(double p, std::size_t tests) { return std::min(1.0, p * static_cast<double>(tests)); }

}  // namespace distractnet
