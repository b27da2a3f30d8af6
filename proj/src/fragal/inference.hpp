#pragma once

// Asymptotic inference for IS-AL runs: plug-in Hessian and score-outer
// matrices, the sandwich covariance, confidence ellipsoids, the two-run
// convergence statistic and the combined two-run estimator.

#include <stdexcept>

#include "estimators.hpp"
#include "math2.hpp"
#include "model.hpp"

namespace fragal::inference {

/// Raised when a matrix that must be inverted has condition number above
/// 1e12 (inference is then unavailable for that run).
struct SingularHessianError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Plug-in matrices at sample size n: r_ddot (weighted empirical Hessian of
/// the loss), v (weighted score outer product) and the sandwich
/// g = r_ddot^-1 v r_ddot^-T.
struct CovariancePack {
  Mat2 r_ddot_hat{};
  Mat2 v_hat{};
  Mat2 g_hat{};
  std::size_t n = 0;
};

/// Confidence region {theta : (theta-c)^T shape^-1 (theta-c) < chi2_thr}.
/// shape is the scaled covariance (G/n, V_mle/n, or G_12/(2n)); volume()
/// reports det(shape), the CEV convention used throughout the benchmarks.
struct Ellipsoid {
  model::FragilityParams center{};
  Mat2 shape{};
  Mat2 shape_inv{};
  double level = 0.0;
  double chi2_threshold = 0.0;

  bool contains(const model::FragilityParams& theta) const {
    const Vec2 d{theta.alpha - center.alpha, theta.beta - center.beta};
    return d.dot(shape_inv * d) < chi2_threshold;
  }
  double volume() const { return shape.det(); }
};

struct ConvergenceVerdict {
  double w_n = 0.0;
  double threshold = 0.0;  // (1-xi)-quantile of chi2(2)
  bool reject = false;
};

/// Two-run combination: averaged estimate with its own sandwich; the
/// ellipsoid uses the doubled sample size.
struct CombinedRuns {
  model::FragilityParams theta_12{};
  CovariancePack pack_12{};
};

/// (1/m) sum of frozen-ratio-weighted loss Hessians over the first m draws,
/// evaluated at theta. Throws SingularHessianError when the result is
/// numerically rank deficient.
Mat2 hessian_plug_in(const estimators::IsalTrajectory& traj, std::size_t m,
                     const model::FragilityParams& theta);

/// (1/m) sum of doubly-weighted score outer products: each draw carries its
/// frozen draw-time ratio times the fresh ratio p/q_{theta,eps} recomputed
/// at the evaluation theta.
Mat2 score_outer_plug_in(const estimators::IsalTrajectory& traj, std::size_t m,
                         const model::FragilityParams& theta);

/// Sandwich plug-in at the step-m estimate of the run.
CovariancePack g_hat(const estimators::IsalTrajectory& traj, std::size_t m);

/// Level-xi ellipsoid centered at `center` with shape pack.g_hat / n.
Ellipsoid ellipsoid(const model::FragilityParams& center,
                    const CovariancePack& pack, double xi);

/// Same region from an externally estimated covariance (bootstrap MLE):
/// shape = cov / n.
Ellipsoid ellipsoid_from_cov(const model::FragilityParams& center,
                             const Mat2& cov, std::size_t n, double xi);

/// Cross-gradient convergence statistic over the first m draws of two
/// independent runs of equal epsilon. Rejects asymptotic normality at level
/// xi when W exceeds the (1-xi) chi2(2) quantile.
ConvergenceVerdict w_statistic(const estimators::IsalTrajectory& run1,
                               const estimators::IsalTrajectory& run2,
                               std::size_t m, double xi);

CombinedRuns combine_runs(const estimators::IsalTrajectory& run1,
                          const estimators::IsalTrajectory& run2,
                          std::size_t m);

/// Ellipsoid for the combined estimator (quadratic form at 2n).
Ellipsoid combined_ellipsoid(const CombinedRuns& combined, double xi);

}  // namespace fragal::inference
