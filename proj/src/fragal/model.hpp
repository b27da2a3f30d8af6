#pragma once

// Lognormal fragility model f(x) = Phi((x - log alpha)/beta) on x = log IM,
// the quadratic loss with exact analytic first and second derivatives in
// theta = (alpha, beta), and the 1/beta regularization term.

#include <cmath>

#include "math2.hpp"

namespace fragal::model {

/// theta = (alpha, beta): median intensity measure (IM units) and
/// dimensionless log-standard deviation.
struct FragilityParams {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Compact parameter box Theta. Defaults bracket every fit reported for the
/// cases in this project; override through the study config.
struct ParamBounds {
  double alpha_lo = 1e-3;
  double alpha_hi = 1e2;
  double beta_lo = 0.05;
  double beta_hi = 2.0;

  bool contains(const FragilityParams& t) const {
    return t.alpha >= alpha_lo && t.alpha <= alpha_hi && t.beta >= beta_lo &&
           t.beta <= beta_hi;
  }
  FragilityParams clamp(const FragilityParams& t) const {
    return {std::min(std::max(t.alpha, alpha_lo), alpha_hi),
            std::min(std::max(t.beta, beta_lo), beta_hi)};
  }
  /// True when a coordinate sits within 1e-6 of a bound, relative to the
  /// bound range (the fit is then treated as degenerate downstream).
  bool on_boundary(const FragilityParams& t) const {
    const double ta = 1e-6 * (alpha_hi - alpha_lo);
    const double tb = 1e-6 * (beta_hi - beta_lo);
    return t.alpha <= alpha_lo + ta || t.alpha >= alpha_hi - ta ||
           t.beta <= beta_lo + tb || t.beta >= beta_hi - tb;
  }
};

/// Loss (or penalty) value with its exact gradient and Hessian in theta.
struct LossBundle {
  double value = 0.0;
  Vec2 grad{};
  Mat2 hess{};
};

struct RegularizerConfig {
  double beta_reg = 0.0;
};

/// P(failure | log IM = x) under theta.
inline double fragility_prob(const FragilityParams& theta, double x) {
  return normal_cdf((x - std::log(theta.alpha)) / theta.beta);
}

/// Complement 1 - f evaluated through the opposite tail (no cancellation).
inline double fragility_sf(const FragilityParams& theta, double x) {
  return normal_sf((x - std::log(theta.alpha)) / theta.beta);
}

/// Gradient of f in theta; needed standalone by the inference module.
Vec2 fragility_grad(const FragilityParams& theta, double x);

/// Quadratic loss (s - f(x))^2 with analytic derivatives.
LossBundle quad_loss(const FragilityParams& theta, double x, int s);

/// Regularization term beta_reg / beta with analytic derivatives.
LossBundle regularizer(const FragilityParams& theta,
                       const RegularizerConfig& cfg);

}  // namespace fragal::model
