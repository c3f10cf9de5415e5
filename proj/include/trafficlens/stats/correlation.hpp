#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "trafficlens/common.hpp"
#include "trafficlens/stats/special.hpp"

namespace trafficlens::stats {

/// Sample Pearson correlation (two-pass, centered). Throws NumericError when
/// n < 3 or either input has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw NumericError("pearson: need at least 3 observations");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericError("pearson: zero-variance input, correlation undefined");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

/// 1-based ranks with ties replaced by their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

struct SpearmanResult {
  double r = 0.0;
  double p = 1.0;  // two-sided, t approximation with n-2 df
  std::size_t n = 0;
};

inline SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("spearman: length mismatch");
  if (x.size() < 3) throw NumericError("spearman: need at least 3 observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  SpearmanResult res;
  res.n = x.size();
  try {
    res.r = pearson(rx, ry);
  } catch (const NumericError&) {
    throw NumericError("spearman: all-equal input, rank correlation undefined");
  }
  if (std::abs(res.r) >= 1.0) {
    res.p = 0.0;
  } else {
    const double df = static_cast<double>(res.n - 2);
    const double t = res.r * std::sqrt(df / (1.0 - res.r * res.r));
    res.p = two_sided_t_p(t, df);
  }
  return res;
}

/// Comparison of two overlapping correlations r1 = cor(a, c), r2 = cor(b, c)
/// with r12 = cor(a, b), all on the same n observations.
struct CorrTestResult {
  double r1 = 0.0;
  double r2 = 0.0;
  double r12 = 0.0;
  std::size_t n = 0;
  double z = 0.0;
  double p = 1.0;
  bool one_sided = false;  // p = P(Z > z) when set, else two-sided
};

/// Meng, Rosenthal & Rubin (1992) z-test for dependent overlapping correlations.
inline CorrTestResult dependent_corr_z(double r1, double r2, double r12, std::size_t n, bool one_sided = false) {
  for (double r : {r1, r2, r12})
    if (!(std::abs(r) < 1.0))
      throw NumericError("dependent_corr_z: correlations must lie strictly inside (-1, 1), got " + format_double(r));
  if (n <= 3) throw NumericError("dependent_corr_z: need n > 3");
  const double rbar2 = 0.5 * (r1 * r1 + r2 * r2);
  const double f = std::min(1.0, (1.0 - r12) / (2.0 * (1.0 - rbar2)));
  const double h = (1.0 - f * rbar2) / (1.0 - rbar2);
  CorrTestResult res{r1, r2, r12, n, 0.0, 1.0, one_sided};
  res.z = (std::atanh(r1) - std::atanh(r2)) * std::sqrt(static_cast<double>(n - 3) / (2.0 * (1.0 - r12) * h));
  res.p = one_sided ? normal_sf(res.z) : two_sided_normal_p(res.z);
  return res;
}

}  // namespace trafficlens::stats
