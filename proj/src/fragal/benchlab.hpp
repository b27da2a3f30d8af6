#pragma once

// Replication harness and benchmark quantities: per-strategy replication
// runners over a labeled pool case, training/testing errors, RSD/RB and
// efficiency metrics, coverage probabilities, ellipsoid volumes, the MLE
// bootstrap, the k-means nonparametric reference curve and asymptotic
// fragility-curve bands.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "estimators.hpp"
#include "inference.hpp"
#include "model.hpp"

namespace fragal::benchlab {

struct TestSet {
  std::vector<double> x;
  std::vector<int> s;
  std::size_t size() const { return x.size(); }
};

enum class IsalInitMode {
  kNaiveSample,  // theta0 from an RS fit of a fresh 20-point p-sample
  kFixedTheta,   // theta0 supplied by the case (cheap-model surrogate)
};

/// Everything a strategy replication needs: the labeled pool, the marginal
/// model of x, the shared validation set, the reference parameter and bias
/// constant, and the IS-AL initialization rule.
struct CaseContext {
  std::vector<double> pool_x;
  std::vector<int> pool_labels;
  sampling::MarginalModel marginal{};
  TestSet test;
  model::ParamBounds bounds{};
  model::FragilityParams theta_star{};
  double b = std::numeric_limits<double>::quiet_NaN();
  IsalInitMode init_mode = IsalInitMode::kNaiveSample;
  model::FragilityParams fixed_theta0{};
  std::vector<double> beta_reg_grid{1e-4, 1e-3, 1e-2, 1e-1};
  std::size_t naive_init_size = 20;
};

struct SyntheticSpec {
  model::FragilityParams theta_star{0.3, 0.4};
  double x_mean = std::log(0.3 / 5.0);
  double x_var = 1.69;
  std::size_t pool_size = 10000;
  std::size_t test_size = 10000;
  model::ParamBounds bounds{};
  std::vector<double> beta_reg_grid{1e-4, 1e-3, 1e-2, 1e-1};
};

/// Builds the known-curve case: pool x_i ~ N(mean, var) with pre-assigned
/// Bernoulli(mu(x_i)) labels, an i.i.d. validation set, and the exact bias
/// constant b = E[mu(X)(1 - mu(X))] by quadrature.
CaseContext build_synthetic_case(const SyntheticSpec& spec,
                                 std::uint64_t seed);

struct IsalRep {
  estimators::IsalTrajectory traj;
  model::RegularizerConfig reg{};
  bool loo_degenerate = false;
  std::size_t oracle_calls_total = 0;  // prep sample + run
};

/// One IS-AL replication: initialization per the case's init mode, LOO
/// selection of beta_reg on the initialization sample, then the adaptive
/// run. Fully determined by (case, parameters, seed).
IsalRep run_isal_replication(const CaseContext& ctx, std::size_t n,
                             std::size_t n0, double epsilon,
                             std::uint64_t seed);

/// RS baseline replication (q = p, unit weights), same LOO protocol.
IsalRep run_rs_replication(const CaseContext& ctx, std::size_t n,
                           std::size_t n0, std::uint64_t seed);

struct MleRep {
  estimators::WeightedDataset data;
  std::vector<std::size_t> sizes;
  std::vector<estimators::FitResult> fits;  // aligned with sizes
  model::RegularizerConfig reg{};           // used in error definitions only
  bool loo_degenerate = false;
  std::size_t oracle_calls = 0;
};

/// MLE replication: n i.i.d. p-draws, LOO-selected beta_reg on the first n0
/// (for comparable training errors), ML fits at the requested sizes.
MleRep run_mle_replication(const CaseContext& ctx, std::size_t n,
                           std::size_t n0, std::span<const std::size_t> sizes,
                           std::uint64_t seed);

/// Testing error: mean quadratic loss over the validation set plus
/// beta_reg / (n_t beta).
double test_risk(const model::FragilityParams& theta,
                 const model::RegularizerConfig& reg, const TestSet& test);

struct MetricRow {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double rsd = std::numeric_limits<double>::quiet_NaN();
  double rb = std::numeric_limits<double>::quiet_NaN();
  double nu_vs_isal = std::numeric_limits<double>::quiet_NaN();
  double q10 = std::numeric_limits<double>::quiet_NaN();
  double q90 = std::numeric_limits<double>::quiet_NaN();
  std::size_t reps = 0;
};

/// RSD/RB/mean/quantiles of per-replication risks; nu against the IS-AL
/// risks when provided (identically 1 against itself).
MetricRow compute_metrics(const std::vector<double>& risks, double b,
                          const std::vector<double>* isal_risks);

struct Coverage {
  double cp = 0.0;
  double se = 0.0;
  std::size_t hits = 0;
  std::size_t total = 0;
};

Coverage coverage_probability(const std::vector<bool>& contains_star);

/// Confidence ellipsoid volume det(cov / n).
double cev(const Mat2& cov, std::size_t n);

struct TooManyDegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BootstrapCov {
  Mat2 v_mle{};
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

/// Bootstrap covariance of an MLE fit: B resamples of size n, refit each,
/// V = (1/B) sum n (theta_b - theta_hat)(theta_b - theta_hat)^T. Resamples
/// with a single label are dropped and counted; more than 50% dropped
/// raises TooManyDegenerateError.
BootstrapCov bootstrap_mle_cov(const estimators::WeightedDataset& data,
                               std::size_t n_boot,
                               const model::ParamBounds& bounds,
                               const model::FragilityParams& theta_hat,
                               Rng& rng);

struct ReferenceCurve {
  std::vector<double> centers;  // sorted cluster centers (IM units)
  std::vector<double> fraction;
  std::vector<std::size_t> counts;
};

/// 1-D k-means (Lloyd, 10 restarts) over raw IM values with per-cluster
/// empirical failure fractions. Plotting/bias reference only.
ReferenceCurve nonparametric_reference(std::span<const double> ims,
                                       std::span<const int> labels,
                                       std::size_t k, Rng& rng);

struct FragilityBand {
  std::vector<double> x_grid;  // log-IM grid
  std::vector<double> lo, hi, point;
};

/// Pointwise band of fragility curves under theta ~ N(theta_hat, cov),
/// parameters clipped to the box; quantiles (q_lo, q_hi) over `draws`
/// samples per grid point.
FragilityBand fragility_ci_from_asymptotics(
    const model::FragilityParams& theta_hat, const Mat2& cov,
    std::span<const double> x_grid, std::size_t draws, double q_lo,
    double q_hi, const model::ParamBounds& bounds, Rng& rng);

/// Runs fn(0..count-1) on `threads` workers. Tasks must only write to their
/// own slot; results are then independent of the thread count.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fragal::benchlab
