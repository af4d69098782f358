#pragma once

// Standard normal density, distribution and quantile functions with
// tail-stable variants used by the rating update and its test oracle.

namespace arena::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kSqrt2 = 1.41421356237309504880;

double pdf(double x);
double cdf(double x);
double log_cdf(double x);

/// Mills ratio R(z) = (1 - cdf(z)) / pdf(z). Finite for every finite z and
/// accurate in the far right tail where both factors underflow.
double mills_ratio(double z);

/// Inverse of cdf on (0, 1). Wichura's AS241 rational approximation,
/// relative error around 1e-16.
double quantile(double p);

}  // namespace arena::normal
