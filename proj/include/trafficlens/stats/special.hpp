#pragma once

#include <cmath>
#include <optional>

#include <boost/math/distributions/students_t.hpp>

#include "trafficlens/common.hpp"

namespace trafficlens::stats {

/// Upper tail P(Z > z) of the standard normal.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Upper tail P(T > t) of Student's t with `df` degrees of freedom (df may be fractional).
inline double student_t_sf(double t, double df) {
  if (!(df > 0.0)) throw NumericError("student_t_sf: degrees of freedom must be positive");
  if (std::isnan(t)) return t;
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  boost::math::students_t dist(df);
  return boost::math::cdf(boost::math::complement(dist, t));
}

inline double two_sided_t_p(double t, double df) {
  if (std::isnan(t)) return t;
  return std::min(1.0, 2.0 * student_t_sf(std::abs(t), df));
}

inline double two_sided_normal_p(double z) { return std::min(1.0, 2.0 * normal_sf(std::abs(z))); }

/// ln(value / pop * 1000); missing when value <= 0.
inline std::optional<double> log_per_1000(double value, double pop) {
  if (!(pop > 0.0)) throw InputError("log_per_1000: invalid population " + format_double(pop));
  if (!(value > 0.0) || !std::isfinite(value)) return std::nullopt;
  return std::log(value / pop * 1000.0);
}

}  // namespace trafficlens::stats
