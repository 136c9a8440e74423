#pragma once

#include <cmath>
#include <numbers>

namespace screenopt {

inline constexpr double kInvSqrt2 = 0.7071067811865475244;
inline const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

inline double norm_log_pdf(double x, double variance) {
  return -0.5 * x * x / variance - 0.5 * std::log(variance) - kLogSqrt2Pi;
}

inline double norm_pdf(double x, double variance) {
  return std::exp(norm_log_pdf(x, variance));
}

// standard normal CDF
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

// standard normal upper tail
inline double norm_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

// P(|Z| >= z) for standard normal
inline double two_sided_tail(double z) { return std::erfc(std::abs(z) * kInvSqrt2); }

}  // namespace screenopt
