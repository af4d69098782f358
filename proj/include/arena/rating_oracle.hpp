#pragma once

#include "arena/rating.hpp"

namespace arena {

struct OraclePosterior {
  Gaussian first;
  Gaussian second;
  int panels = 0;  // composite Gauss-Legendre panels needed to converge
};

/// Reference posterior by numerical integration of the exact likelihood
///   P(first wins | s_a, s_b) = cdf((s_a - s_b - eps) / (sqrt(2) beta))
///   P(draw | s_a, s_b)       = cdf((eps - d) / (sqrt(2) beta))
///                              - cdf((-eps - d) / (sqrt(2) beta))
/// followed by moment matching. It never touches the v/w functions.
///
/// The likelihood depends on the skills only through d = s_a - s_b, so the
/// two-dimensional integral is reduced exactly: d is integrated numerically
/// and each skill is recovered from its Gaussian conditional given d.
/// The integration window spans +-8 prior deviations of d and is widened
/// around the posterior mode for lopsided upsets. Node count doubles until
/// the moments agree to 1e-11; NumericalError if they never do.
OraclePosterior oracle_update(const Gaussian& a, const Gaussian& b,
                              OutcomeKind outcome, const RatingConfig& cfg);

}  // namespace arena
