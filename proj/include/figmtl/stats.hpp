// Copyright 2026 The figmtl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Student t distribution and the two-sample t-tests used for model comparison.

#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>

#include "figmtl/errors.hpp"

namespace figmtl::stats {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ContractError("incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // The continued fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(b, a, 1.0 - x);
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front) / a;

  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double f = 1.0, c = 1.0, d = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const int m = i / 2;
    double numerator;
    if (i == 0) {
      numerator = 1.0;
    } else if (i % 2 == 0) {
      numerator = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    } else {
      numerator = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    }
    d = 1.0 + numerator * d;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = 1.0 + numerator / c;
    if (std::abs(c) < tiny) c = tiny;
    const double cd = c * d;
    f *= cd;
    if (std::abs(1.0 - cd) < eps) return front * (f - 1.0);
  }
  throw NumericError("incomplete_beta: continued fraction did not converge");
}

/// Two-tailed p-value P(|T| >= |t|) for Student's t with df degrees of freedom.
inline double t_two_tailed_p(double t, double df) {
  if (!(df > 0.0)) throw ContractError("t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

/// Student t CDF.
inline double t_cdf(double t, double df) {
  const double tail = 0.5 * t_two_tailed_p(t, df);
  return t >= 0 ? 1.0 - tail : tail;
}

enum class TestVariant { Paired, Welch };

inline std::string to_string(TestVariant v) { return v == TestVariant::Paired ? "paired" : "welch"; }

inline TestVariant parse_variant(const std::string& s) {
  if (s == "paired") return TestVariant::Paired;
  if (s == "welch") return TestVariant::Welch;
  throw ConfigError("unknown t-test variant '" + s + "'");
}

struct SignificanceResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  std::size_t sample_size = 0;
  TestVariant variant = TestVariant::Paired;
  /// Zero variance with a nonzero mean difference: t is infinite and p is
  /// below any representable threshold (reported as 0, printed "< 1e-15").
  bool degenerate = false;
};

namespace detail {
inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}
inline double sample_variance(std::span<const double> v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}
}  // namespace detail

/// t-test of sample_b against sample_a. The statistic is positive when b's mean
/// exceeds a's (paired: differences are b - a).
inline SignificanceResult t_test(std::span<const double> a, std::span<const double> b,
                                 TestVariant variant = TestVariant::Paired) {
  if (a.size() < 2 || b.size() < 2) throw ContractError("t_test: each sample needs >= 2 values");
  SignificanceResult r;
  r.variant = variant;
  double diff, se2;
  if (variant == TestVariant::Paired) {
    if (a.size() != b.size()) throw ContractError("t_test: paired samples must have equal size");
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = b[i] - a[i];
    diff = detail::mean(d);
    se2 = detail::sample_variance(d, diff) / static_cast<double>(n);
    r.sample_size = n;
    r.degrees_of_freedom = static_cast<double>(n - 1);
  } else {
    const double ma = detail::mean(a), mb = detail::mean(b);
    const double va = detail::sample_variance(a, ma) / static_cast<double>(a.size());
    const double vb = detail::sample_variance(b, mb) / static_cast<double>(b.size());
    diff = mb - ma;
    se2 = va + vb;
    r.sample_size = a.size() + b.size();
    const double denom = va * va / static_cast<double>(a.size() - 1) +
                         vb * vb / static_cast<double>(b.size() - 1);
    r.degrees_of_freedom =
        denom > 0.0 ? se2 * se2 / denom : static_cast<double>(a.size() + b.size() - 2);
  }
  if (se2 == 0.0) {
    if (diff == 0.0) {
      r.t_statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.t_statistic = diff > 0 ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
      r.degenerate = true;
    }
    return r;
  }
  r.t_statistic = diff / std::sqrt(se2);
  r.p_value = t_two_tailed_p(r.t_statistic, r.degrees_of_freedom);
  return r;
}

}  // namespace figmtl::stats
