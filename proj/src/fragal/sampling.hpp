#pragma once

// Marginal density handling, the variance-optimal instrumental weight, the
// defensive mixture over a candidate pool, and weighted pool draws. Draws
// are with replacement; the likelihood ratio of a draw is frozen at draw
// time and never recomputed after the parameter moves on.

#include <cstddef>
#include <span>
#include <vector>

#include "math2.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace fragal::sampling {

/// Marginal law of x = log IM. Either a known Gaussian (synthetic case) or
/// the empirical uniform law over a signal pool (oscillator case).
struct MarginalModel {
  enum class Kind { kAnalyticGaussian, kPoolEmpirical };

  Kind kind = Kind::kPoolEmpirical;
  double mean = 0.0;      // analytic mode only
  double variance = 1.0;  // analytic mode only

  static MarginalModel analytic_gaussian(double mean, double variance) {
    return {Kind::kAnalyticGaussian, mean, variance};
  }
  static MarginalModel pool_empirical() {
    return {Kind::kPoolEmpirical, 0.0, 1.0};
  }

  double density(double x) const {
    const double sd = std::sqrt(variance);
    return normal_pdf((x - mean) / sd) / sd;
  }
};

/// Defensive mixture q = eps * p + (1 - eps) * q_theta evaluated over a
/// pool. draw_prob holds the normalized selection probabilities,
/// likelihood_ratio the exact p/q per pool point. Immutable once built.
struct DefensiveDensity {
  model::FragilityParams theta{};
  double epsilon = 1.0;
  std::span<const double> pool_x;
  std::vector<double> draw_prob;
  std::vector<double> draw_cdf;
  std::vector<double> likelihood_ratio;
  bool degenerate = false;  // q_theta vanished over the pool; fell back to p
};

struct DrawRecord {
  std::size_t index = 0;
  double x = 0.0;
  double likelihood_ratio = 1.0;
  model::FragilityParams theta_at_draw{};
};

/// The p-independent factor of the optimal instrumental density,
/// g(x) = sqrt(f (1-f)^4 + (1-f) f^4) with f the fragility value. Peaks in
/// the transition zone of the curve and vanishes where f is flat.
double optimal_weight(const model::FragilityParams& theta, double x);

/// Builds the defensive mixture over the pool. For the empirical marginal,
/// q_i = eps/N + (1-eps) g_i / sum(g); for the analytic one, the continuous
/// q = eps p + (1-eps) p g / Z with Z = integral of p*g by adaptive
/// quadrature. If g vanishes on the whole pool the density degenerates to p
/// (flagged), keeping every ratio equal to one.
DefensiveDensity defensive_weights(std::span<const double> pool_x,
                                   const model::FragilityParams& theta,
                                   double epsilon,
                                   const MarginalModel& marginal);

/// One weighted draw; deterministic given the rng state.
DrawRecord draw(const DefensiveDensity& density, Rng& rng);

}  // namespace fragal::sampling
