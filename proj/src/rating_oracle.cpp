#include "arena/rating_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "arena/errors.hpp"
#include "arena/normal.hpp"

namespace arena {

namespace {

constexpr int kNodes = 20;

struct GaussLegendre {
  std::array<double, kNodes> x{};
  std::array<double, kNodes> w{};

  GaussLegendre() {
    for (int i = 0; i < kNodes; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (kNodes + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = z;
        for (int k = 2; k <= kNodes; ++k) {
          const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = kNodes * (z * p1 - p0) / (z * z - 1.0);
        const double step = p1 / dp;
        z -= step;
        if (std::abs(step) < 1e-16) break;
      }
      x[i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

const GaussLegendre& rule() {
  static const GaussLegendre r;
  return r;
}

// log(cdf(hi) - cdf(lo)) for lo < hi without cancellation in either tail.
double log_cdf_difference(double hi, double lo) {
  if (lo + hi > 0.0) {
    // Interval sits in the right half: use cdf(-lo) - cdf(-hi).
    const double big = normal::log_cdf(-lo);
    const double small = normal::log_cdf(-hi);
    return big + std::log1p(-std::exp(small - big));
  }
  const double big = normal::log_cdf(hi);
  const double small = normal::log_cdf(lo);
  return big + std::log1p(-std::exp(small - big));
}

struct DifferencePosterior {
  double prior_mean;
  double prior_var;
  double eps;
  double noise;  // sqrt(2) beta
  OutcomeKind outcome;

  double log_density(double d) const {
    const double z = d - prior_mean;
    const double log_prior = -0.5 * z * z / prior_var;
    double log_lik = 0.0;
    switch (outcome) {
      case OutcomeKind::kFirstWins:
        log_lik = normal::log_cdf((d - eps) / noise);
        break;
      case OutcomeKind::kSecondWins:
        log_lik = normal::log_cdf((-d - eps) / noise);
        break;
      case OutcomeKind::kDraw:
        log_lik = log_cdf_difference((eps - d) / noise, (-eps - d) / noise);
        break;
    }
    return log_prior + log_lik;
  }
};

struct DifferenceMoments {
  double mean;
  double var;
};

DifferenceMoments integrate(const DifferencePosterior& post, double lo,
                            double hi, double centre, double log_peak,
                            int panels) {
  const auto& gl = rule();
  const double width = (hi - lo) / panels;
  double z0 = 0.0;
  double z1 = 0.0;
  double z2 = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width;
    for (int i = 0; i < kNodes; ++i) {
      const double d = mid + 0.5 * width * gl.x[i];
      const double f =
          gl.w[i] * std::exp(post.log_density(d) - log_peak);
      const double off = d - centre;
      z0 += f;
      z1 += f * off;
      z2 += f * off * off;
    }
  }
  const double m = z1 / z0;
  return {centre + m, z2 / z0 - m * m};
}

}  // namespace

OraclePosterior oracle_update(const Gaussian& a, const Gaussian& b,
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

  DifferencePosterior post;
  post.prior_mean = a.mean - b.mean;
  post.prior_var = var_a + var_b;
  post.eps = draw_margin(cfg.p_draw, cfg.beta);
  post.noise = normal::kSqrt2 * cfg.beta;
  post.outcome = outcome;
  const double prior_dev = std::sqrt(post.prior_var);

  // The log density is concave; golden-section search finds its mode.
  double lo = std::min(post.prior_mean, -post.eps) - 10.0 * (prior_dev + post.noise);
  double hi = std::max(post.prior_mean, post.eps) + 10.0 * (prior_dev + post.noise);
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - golden * (hi - lo);
  double x2 = lo + golden * (hi - lo);
  double f1 = post.log_density(x1);
  double f2 = post.log_density(x2);
  for (int iter = 0; iter < 300 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++iter) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = post.log_density(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = post.log_density(x1);
    }
  }
  const double mode = 0.5 * (lo + hi);
  const double log_peak = post.log_density(mode);
  if (!std::isfinite(log_peak)) {
    throw ArenaError(ErrorCode::kNumerical, "oracle density is not finite");
  }

  // Strong concavity from the prior bounds the tails by exp(-k^2/2) at
  // k prior deviations from the mode.
  const double win_lo = std::min(post.prior_mean - 8.0 * prior_dev, mode - 10.0 * prior_dev);
  const double win_hi = std::max(post.prior_mean + 8.0 * prior_dev, mode + 10.0 * prior_dev);

  int panels = 64;
  DifferenceMoments prev = integrate(post, win_lo, win_hi, mode, log_peak, panels);
  bool converged = false;
  for (; panels <= (1 << 16); panels *= 2) {
    const DifferenceMoments next =
        integrate(post, win_lo, win_hi, mode, log_peak, panels * 2);
    const bool mean_ok = std::abs(next.mean - prev.mean) <= 1e-11 * (1.0 + prior_dev);
    const bool var_ok = std::abs(next.var - prev.var) <= 1e-11 * post.prior_var;
    prev = next;
    if (mean_ok && var_ok) {
      converged = true;
      panels *= 2;
      break;
    }
  }
  if (!converged || !(prev.var > 0.0)) {
    throw ArenaError(ErrorCode::kNumerical, "oracle quadrature did not converge");
  }

  // s_a | d ~ N(mu_a + (var_a / var_d)(d - mu_d), var_a var_b / var_d), and
  // symmetrically for s_b; total mean and variance follow.
  const double shift = prev.mean - post.prior_mean;
  const double ka = var_a / post.prior_var;
  const double kb = var_b / post.prior_var;
  const double cond_var = var_a * var_b / post.prior_var;

  OraclePosterior out;
  out.panels = panels;
  out.first.mean = a.mean + ka * shift;
  out.second.mean = b.mean - kb * shift;
  out.first.dev = std::sqrt(cond_var + ka * ka * prev.var);
  out.second.dev = std::sqrt(cond_var + kb * kb * prev.var);
  return out;
}

}  // namespace arena
