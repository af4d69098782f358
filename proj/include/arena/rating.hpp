#pragma once

// Two-player TrueSkill belief updates.

namespace arena {

/// Belief over one agent's skill on one (task, criterion).
struct Gaussian {
  double mean = 0.0;
  double dev = 1.0;

  /// Throws DomainError unless dev > 0 and both fields are finite.
  void validate() const;

  bool operator==(const Gaussian&) const = default;
};

struct RatingConfig {
  double mu0 = 25.0;
  double sigma0 = 25.0 / 3.0;
  double beta = 25.0 / 6.0;
  double tau = 25.0 / 300.0;
  double p_draw = 0.10;

  void validate() const;
  Gaussian prior() const { return {mu0, sigma0}; }

  bool operator==(const RatingConfig&) const = default;
};

/// Intermediate quantities of one update, exposed for inspection.
struct UpdateTerms {
  double c = 0.0;           // sqrt(2 beta^2 + dev_a^2 + dev_b^2)
  double t = 0.0;           // (mean_a - mean_b) / c
  double eps_scaled = 0.0;  // draw margin / c
  double v = 0.0;
  double w = 0.0;
};

enum class OutcomeKind { kFirstWins, kSecondWins, kDraw };

enum class MomentKind { kWin, kDraw };

struct Moments {
  double v = 0.0;
  double w = 0.0;
};

struct UpdateResult {
  Gaussian first;
  Gaussian second;
  UpdateTerms terms;
};

/// Additive (v) and multiplicative (w) corrections of a Gaussian truncated
/// to the winning region t - eps > 0 or the draw band |t| < eps. Stable for
/// |t| well beyond 40.
Moments truncation_moments(double t, double eps_scaled, MomentKind kind);

/// eps = sqrt(2) * beta * quantile((p_draw + 1) / 2).
double draw_margin(double p_draw, double beta);

/// Applies dynamics noise and one match outcome to both beliefs.
UpdateResult update_ratings(const Gaussian& a, const Gaussian& b,
                            OutcomeKind outcome, const RatingConfig& cfg);

/// Draw-probability pairing heuristic in (0, 1]; symmetric in (a, b).
double match_quality(const Gaussian& a, const Gaussian& b,
                     const RatingConfig& cfg);

}  // namespace arena
