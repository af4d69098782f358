#include "arena/rating.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "arena/errors.hpp"
#include "arena/normal.hpp"

namespace arena {

namespace {

bool finite(double x) { return std::isfinite(x); }

Moments win_moments(double t, double eps_scaled) {
  const double x = t - eps_scaled;
  // pdf(x) / cdf(x) == 1 / R(-x); the ratio form survives x << 0.
  const double v = 1.0 / normal::mills_ratio(-x);
  const double w = v * (v + x);
  return {v, w};
}

Moments draw_moments(double t, double eps_scaled) {
  if (eps_scaled <= 0.0) {
    throw ArenaError(ErrorCode::kNumerical,
                     "draw moments need a positive draw margin");
  }
  // Evaluate at s = |t| and mirror: v is odd in t, w is even.
  const double s = std::abs(t);
  const double a = eps_scaled - s;
  const double b = -eps_scaled - s;
  // Every term is divided through by pdf(a); pdf(b) / pdf(a) = exp(-2 eps s).
  const double ratio = std::exp(-2.0 * eps_scaled * s);
  const double denom =
      normal::mills_ratio(-a) - ratio * normal::mills_ratio(-b);
  if (!(denom > 0.0)) {
    throw ArenaError(ErrorCode::kNumerical,
                     "draw moment denominator vanished at t=" +
                         std::to_string(t));
  }
  double v = (ratio - 1.0) / denom;
  const double w = v * v + (a - b * ratio) / denom;
  if (t < 0.0) v = -v;
  return {v, w};
}

}  // namespace

void Gaussian::validate() const {
  if (!finite(mean) || !finite(dev) || !(dev > 0.0)) {
    throw ArenaError(ErrorCode::kDomain,
                     "invalid gaussian (" + std::to_string(mean) + ", " +
                         std::to_string(dev) + ")");
  }
}

void RatingConfig::validate() const {
  const bool ok = finite(mu0) && finite(sigma0) && sigma0 > 0.0 &&
                  finite(beta) && beta > 0.0 && finite(tau) && tau >= 0.0 &&
                  p_draw >= 0.0 && p_draw < 1.0;
  if (!ok) throw ArenaError(ErrorCode::kDomain, "invalid rating config");
}

Moments truncation_moments(double t, double eps_scaled, MomentKind kind) {
  if (!(eps_scaled >= 0.0)) {
    throw ArenaError(ErrorCode::kDomain, "negative draw margin");
  }
  if (!finite(t) || !finite(eps_scaled)) {
    throw ArenaError(ErrorCode::kNumerical, "non-finite moment argument");
  }
  Moments m = kind == MomentKind::kWin ? win_moments(t, eps_scaled)
                                       : draw_moments(t, eps_scaled);
  if (!finite(m.v) || !finite(m.w)) {
    throw ArenaError(ErrorCode::kNumerical,
                     "moments not representable at t=" + std::to_string(t));
  }
  // Rounding can push w a few ulps outside its range.
  m.w = std::clamp(m.w, 0.0, 1.0);
  return m;
}

double draw_margin(double p_draw, double beta) {
  if (!(p_draw >= 0.0 && p_draw < 1.0)) {
    throw ArenaError(ErrorCode::kDomain, "p_draw must lie in [0, 1)");
  }
  if (!(beta > 0.0)) throw ArenaError(ErrorCode::kDomain, "beta must be > 0");
  if (p_draw == 0.0) return 0.0;
  return normal::kSqrt2 * beta * normal::quantile((p_draw + 1.0) / 2.0);
}

UpdateResult update_ratings(const Gaussian& a, const Gaussian& b,
                            OutcomeKind outcome, const RatingConfig& cfg) {
  a.validate();
  b.validate();
  cfg.validate();
  if (outcome == OutcomeKind::kDraw && cfg.p_draw == 0.0) {
    throw ArenaError(ErrorCode::kDomain, "draws are disabled (p_draw = 0)");
  }

  const double tau2 = cfg.tau * cfg.tau;
  const double var_a = a.dev * a.dev + tau2;
  const double var_b = b.dev * b.dev + tau2;
  // Parenthesised so that swapping the players gives bit-identical c.
  const double c2 = 2.0 * cfg.beta * cfg.beta + (var_a + var_b);
  const double c = std::sqrt(c2);

  UpdateTerms terms;
  terms.c = c;
  terms.eps_scaled = draw_margin(cfg.p_draw, cfg.beta) / c;

  // sign = +1 moves a up and b down.
  double sign = 1.0;
  Moments m;
  switch (outcome) {
    case OutcomeKind::kFirstWins:
      terms.t = (a.mean - b.mean) / c;
      m = truncation_moments(terms.t, terms.eps_scaled, MomentKind::kWin);
      break;
    case OutcomeKind::kSecondWins:
      terms.t = (b.mean - a.mean) / c;
      m = truncation_moments(terms.t, terms.eps_scaled, MomentKind::kWin);
      sign = -1.0;
      break;
    case OutcomeKind::kDraw:
      terms.t = (a.mean - b.mean) / c;
      m = truncation_moments(terms.t, terms.eps_scaled, MomentKind::kDraw);
      break;
  }
  terms.v = m.v;
  terms.w = m.w;

  UpdateResult out;
  out.terms = terms;
  out.first.mean = a.mean + sign * (var_a / c) * m.v;
  out.second.mean = b.mean - sign * (var_b / c) * m.v;
  out.first.dev = std::sqrt(var_a * (1.0 - (var_a / c2) * m.w));
  out.second.dev = std::sqrt(var_b * (1.0 - (var_b / c2) * m.w));
  if (!(out.first.dev > 0.0) || !(out.second.dev > 0.0)) {
    throw ArenaError(ErrorCode::kNumerical, "posterior deviation collapsed");
  }
  return out;
}

double match_quality(const Gaussian& a, const Gaussian& b,
                     const RatingConfig& cfg) {
  a.validate();
  b.validate();
  cfg.validate();
  const double two_beta2 = 2.0 * cfg.beta * cfg.beta;
  const double c2 = two_beta2 + (a.dev * a.dev + b.dev * b.dev);
  const double gap = a.mean - b.mean;
  return std::sqrt(two_beta2 / c2) * std::exp(-gap * gap / (2.0 * c2));
}

}  // namespace arena
