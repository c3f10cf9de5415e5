#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "trafficlens/common.hpp"
#include "trafficlens/stats/linalg.hpp"

namespace trafficlens::stats {

struct PcaResult {
  Matrix loadings;                     // n_vars x k, orthonormal columns
  std::vector<double> explained_variance;  // k eigenvalues, non-increasing
  std::vector<double> explained_ratio;     // explained_variance / total variance
  std::vector<double> all_eigenvalues;     // every eigenvalue, non-increasing
  Matrix scores;                       // n_obs x k
  std::vector<double> means;
  std::vector<double> scales;          // column standard deviations (1 when not standardized)
  bool standardized = false;
};

/// Principal components of the sample covariance (or correlation, when
/// standardize is set) matrix. Each loading vector is signed so that its
/// largest-magnitude entry is positive.
inline PcaResult pca(const Matrix& m, std::size_t k, bool standardize, const std::vector<std::string>& names = {}) {
  const std::size_t n = m.rows(), v = m.cols();
  if (n < 2) throw NumericError("pca: need at least 2 observations");
  if (v == 0) throw InputError("pca: no variables");
  if (k == 0 || k > v)
    throw InputError("pca: requested " + std::to_string(k) + " components from " + std::to_string(v) + " variables");

  PcaResult res;
  res.standardized = standardize;
  res.means.assign(v, 0.0);
  res.scales.assign(v, 1.0);
  Matrix centered(n, v);
  std::vector<std::string> zero_var;
  for (std::size_t j = 0; j < v; ++j) {
    double mean = 0.0, max_abs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean += m(i, j);
      max_abs = std::max(max_abs, std::abs(m(i, j)));
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      centered(i, j) = m(i, j) - mean;
      ss += centered(i, j) * centered(i, j);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    res.means[j] = mean;
    if (standardize) {
      if (!(sd > 1e-14 * max_abs) || sd == 0.0) {
        zero_var.push_back(j < names.size() ? names[j] : "column " + std::to_string(j));
        continue;
      }
      res.scales[j] = sd;
      for (std::size_t i = 0; i < n; ++i) centered(i, j) /= sd;
    }
  }
  if (!zero_var.empty()) {
    std::string msg = "pca: cannot standardize zero-variance column(s):";
    for (const auto& z : zero_var) msg += " '" + z + "'";
    throw NumericError(msg);
  }

  Matrix cov(v, v);
  for (std::size_t a = 0; a < v; ++a)
    for (std::size_t b = a; b < v; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += centered(i, a) * centered(i, b);
      s /= static_cast<double>(n - 1);
      cov(a, b) = s;
      cov(b, a) = s;
    }
  double total = 0.0;
  for (std::size_t a = 0; a < v; ++a) total += cov(a, a);

  auto eig = jacobi_eigen(cov);
  res.all_eigenvalues = eig.values;
  res.loadings = Matrix(v, k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t arg = 0;
    for (std::size_t r = 1; r < v; ++r)
      if (std::abs(eig.vectors(r, c)) > std::abs(eig.vectors(arg, c))) arg = r;
    const double sign = eig.vectors(arg, c) < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < v; ++r) res.loadings(r, c) = sign * eig.vectors(r, c);
    const double ev = std::max(0.0, eig.values[c]);
    res.explained_variance.push_back(ev);
    res.explained_ratio.push_back(total > 0 ? ev / total : 0.0);
  }
  res.scores = centered * res.loadings;
  return res;
}

}  // namespace trafficlens::stats
