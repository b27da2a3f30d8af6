#include "sampling.hpp"

#include <stdexcept>

namespace fragal::sampling {

namespace {

// Lifts g off exact zero where Phi underflows, so the defensive ratio stays
// strictly below 1/eps even at extreme parameter values. Statistically
// invisible (g peaks at 0.25).
constexpr double kWeightFloor = 1e-18;

std::vector<double> cumulative(const std::vector<double>& w) {
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    cdf[i] = acc;
  }
  return cdf;
}

}  // namespace

double optimal_weight(const model::FragilityParams& theta, double x) {
  const double f = model::fragility_prob(theta, x);
  const double fc = model::fragility_sf(theta, x);
  // f (1-f)^4 + (1-f) f^4 = f (1-f) ((1-f)^3 + f^3), both tails kept exact.
  const double t = f * fc;
  const double u = fc * fc * fc + f * f * f;
  return std::sqrt(t * u);
}

DefensiveDensity defensive_weights(std::span<const double> pool_x,
                                   const model::FragilityParams& theta,
                                   double epsilon,
                                   const MarginalModel& marginal) {
  if (pool_x.empty())
    throw std::invalid_argument("defensive_weights: empty pool");
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("defensive_weights: epsilon outside [0,1]");

  const std::size_t n = pool_x.size();
  DefensiveDensity out;
  out.theta = theta;
  out.epsilon = epsilon;
  out.pool_x = pool_x;
  out.draw_prob.resize(n);
  out.likelihood_ratio.resize(n);

  std::vector<double> g(n);
  double g_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = optimal_weight(theta, pool_x[i]);
    g_sum += g[i];
  }

  if (g_sum == 0.0) {
    // Fragility flat over the entire pool: fall back to pure defensive q = p.
    out.degenerate = true;
    const double u = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.draw_prob[i] = u;
      out.likelihood_ratio[i] = 1.0;
    }
    out.draw_cdf = cumulative(out.draw_prob);
    return out;
  }

  if (epsilon > 0.0) {
    for (auto& v : g) v += kWeightFloor;
    g_sum += kWeightFloor * static_cast<double>(n);
  }

  if (marginal.kind == MarginalModel::Kind::kPoolEmpirical) {
    // Finite-population view: p is uniform 1/N over the pool, so
    // q_i = eps/N + (1-eps) g_i / sum(g) and the ratio is (1/N)/q_i.
    const double u = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double qi = epsilon * u + (1.0 - epsilon) * g[i] / g_sum;
      out.draw_prob[i] = qi;
      out.likelihood_ratio[i] = u / qi;
    }
  } else {
    // Analytic marginal: Z = integral p g over an 8-sigma window, then the
    // pool (itself p-distributed) is reweighted by q/p = eps + (1-eps) g/Z.
    const double sd = std::sqrt(marginal.variance);
    const double z_norm = integrate_adaptive(
        [&](double x) {
          return marginal.density(x) * (optimal_weight(theta, x) +
                                        (epsilon > 0.0 ? kWeightFloor : 0.0));
        },
        marginal.mean - 8.0 * sd, marginal.mean + 8.0 * sd, 1e-8);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q_over_p = epsilon + (1.0 - epsilon) * g[i] / z_norm;
      out.draw_prob[i] = q_over_p;
      out.likelihood_ratio[i] = 1.0 / q_over_p;
      total += q_over_p;
    }
    for (auto& w : out.draw_prob) w /= total;
  }

  out.draw_cdf = cumulative(out.draw_prob);
  return out;
}

DrawRecord draw(const DefensiveDensity& density, Rng& rng) {
  const std::size_t idx = rng.categorical_from_cdf(density.draw_cdf);
  return {idx, density.pool_x[idx], density.likelihood_ratio[idx],
          density.theta};
}

}  // namespace fragal::sampling
