#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "trafficlens/common.hpp"
#include "trafficlens/stats/linalg.hpp"
#include "trafficlens/stats/special.hpp"

namespace trafficlens::stats {

enum class HcType { HC0, HC1 };

inline std::string to_string(HcType h) { return h == HcType::HC0 ? "HC0" : "HC1"; }

inline HcType parse_hc_type(const std::string& s) {
  if (s == "HC0") return HcType::HC0;
  if (s == "HC1") return HcType::HC1;
  throw InputError("unknown hc_type '" + s + "' (expected HC0 or HC1)");
}

struct RegressionResult {
  std::vector<std::string> names;  // "(Intercept)" first when an intercept was added
  std::vector<double> coef;
  std::vector<double> se_robust;
  std::vector<double> t_stats;
  std::vector<double> p_values;
  std::vector<double> residuals;
  Matrix covariance;  // robust sandwich covariance
  double r2 = 0.0;
  double adj_r2 = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;  // parameters including the intercept
  HcType hc_type = HcType::HC1;
};

inline constexpr const char* kInterceptName = "(Intercept)";

/// OLS with heteroscedasticity-consistent (sandwich) standard errors.
/// `names` labels the columns of X and is used in rank-deficiency errors.
inline RegressionResult ols_hc(const Matrix& x, std::span<const double> y, bool intercept = true,
                               HcType hc = HcType::HC1, std::vector<std::string> names = {}) {
  const std::size_t n = x.rows();
  if (y.size() != n) throw InputError("ols: X has " + std::to_string(n) + " rows but y has " + std::to_string(y.size()));
  if (names.empty())
    for (std::size_t j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
  if (names.size() != x.cols()) throw InputError("ols: column name count mismatch");

  const std::size_t p = x.cols() + (intercept ? 1 : 0);
  if (p == 0) throw InputError("ols: no regressors");
  if (n <= p)
    throw NumericError("ols: need more observations than parameters (n = " + std::to_string(n) +
                       ", p = " + std::to_string(p) + ")");
  Matrix design(n, p);
  std::vector<std::string> all_names;
  if (intercept) all_names.push_back(kInterceptName);
  all_names.insert(all_names.end(), names.begin(), names.end());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    if (intercept) design(i, c++) = 1.0;
    for (std::size_t j = 0; j < x.cols(); ++j) design(i, c++) = x(i, j);
  }

  PivotedQR qr(design);
  if (qr.rank() < p) {
    std::string msg = "ols: design matrix is rank deficient; collinear column(s):";
    for (auto j : dependent_columns(design)) msg += " '" + all_names[j] + "'";
    throw NumericError(msg);
  }

  RegressionResult res;
  res.names = all_names;
  res.n = n;
  res.p = p;
  res.hc_type = hc;
  res.coef = qr.solve(std::vector<double>(y.begin(), y.end()));
  res.residuals.resize(n);
  double ssr = 0.0, ymean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t j = 0; j < p; ++j) fit += design(i, j) * res.coef[j];
    res.residuals[i] = y[i] - fit;
    ssr += res.residuals[i] * res.residuals[i];
    ymean += y[i];
  }
  ymean /= static_cast<double>(n);
  double sst = 0.0;
  for (double v : y) sst += (v - ymean) * (v - ymean);
  res.r2 = sst > 0.0 ? 1.0 - ssr / sst : (ssr > 0.0 ? 0.0 : 1.0);
  res.adj_r2 = 1.0 - (1.0 - res.r2) * static_cast<double>(n - 1) / static_cast<double>(n - p);

  const Matrix bread = qr.normal_inverse();
  Matrix meat(p, p);
  for (std::size_t i = 0; i < n; ++i) {
    const double e2 = res.residuals[i] * res.residuals[i];
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) meat(a, b) += e2 * design(i, a) * design(i, b);
  }
  res.covariance = bread * meat * bread;
  if (hc == HcType::HC1) {
    const double scale = static_cast<double>(n) / static_cast<double>(n - p);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) res.covariance(a, b) *= scale;
  }
  const double df = static_cast<double>(n - p);
  for (std::size_t j = 0; j < p; ++j) {
    const double se = std::sqrt(std::max(0.0, res.covariance(j, j)));
    res.se_robust.push_back(se);
    const double t = res.coef[j] / se;
    res.t_stats.push_back(t);
    res.p_values.push_back(two_sided_t_p(t, df));
  }
  return res;
}

/// Significance stars for p < 0.1 / 0.05 / 0.01.
inline std::string significance_stars(double p) {
  if (!(p < 0.1)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  return "*";
}

}  // namespace trafficlens::stats
