#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace lpe {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Two-sided p-value for a standard-normal Wald statistic.
inline double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

inline double log_sum_exp(std::span<const double> vals) {
  if (vals.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  const double m = *std::max_element(vals.begin(), vals.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : vals) acc += std::exp(v - m);
  return m + std::log(acc);
}

inline double mean(std::span<const double> vals) {
  if (vals.empty()) throw std::invalid_argument("mean: empty input");
  double acc = 0.0;
  for (double v : vals) acc += v;
  return acc / static_cast<double>(vals.size());
}

inline double sample_variance(std::span<const double> vals) {
  if (vals.size() < 2) throw std::invalid_argument("sample_variance: need n >= 2");
  const double m = mean(vals);
  double acc = 0.0;
  for (double v : vals) acc += (v - m) * (v - m);
  return acc / static_cast<double>(vals.size() - 1);
}

struct WilsonInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// 95% Wilson score interval for a binomial proportion.
inline WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials) {
  if (trials <= 0) throw std::invalid_argument("wilson_interval: trials must be positive");
  const double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("pearson_r: need two equal-length series, n >= 2");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson_r: zero-variance input");
  return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> ranks(std::span<const double> vals) {
  const std::size_t n = vals.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && vals[idx[j + 1]] == vals[idx[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank for ties
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = shared;
    i = j + 1;
  }
  return r;
}

inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson_r(rx, ry);
}

/// Empirical quantile with midpoint plotting positions: the k-th order
/// statistic sits at level (k - 0.5)/n and queries interpolate linearly
/// between adjacent order statistics. `sorted` must be ascending.
inline double quantile_midpoint(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw std::invalid_argument("quantile_midpoint: empty input");
  const double n = static_cast<double>(sorted.size());
  double pos = level * n - 0.5;  // 0-based continuous index
  if (pos <= 0.0) return sorted.front();
  if (pos >= n - 1.0) return sorted.back();
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace lpe
