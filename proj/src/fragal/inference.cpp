#include "inference.hpp"

namespace fragal::inference {

namespace {

constexpr double kCondLimit = 1e12;

Mat2 checked_inverse(const Mat2& m, const char* what) {
  if (!std::isfinite(m.det()) || cond2_sym(m) > kCondLimit)
    throw SingularHessianError(std::string(what) +
                               ": condition number above 1e12");
  return m.inverse();
}

void check_prefix(const estimators::IsalTrajectory& traj, std::size_t m) {
  if (m == 0 || m > traj.size())
    throw std::invalid_argument("inference: invalid prefix length");
}

Mat2 sandwich(const Mat2& r_ddot_inv, const Mat2& v) {
  return r_ddot_inv * v * r_ddot_inv.transpose();
}

}  // namespace

Mat2 hessian_plug_in(const estimators::IsalTrajectory& traj, std::size_t m,
                     const model::FragilityParams& theta) {
  check_prefix(traj, m);
  Mat2 acc{};
  for (std::size_t i = 0; i < m; ++i) {
    const auto& d = traj.draws[i];
    acc += model::quad_loss(theta, d.x, traj.labels[i]).hess *
           d.likelihood_ratio;
  }
  acc = acc * (1.0 / static_cast<double>(m));
  if (cond2_sym(acc) > kCondLimit)
    throw SingularHessianError("hessian_plug_in: rank-deficient matrix");
  return acc;
}

Mat2 score_outer_plug_in(const estimators::IsalTrajectory& traj, std::size_t m,
                         const model::FragilityParams& theta) {
  check_prefix(traj, m);
  const sampling::DefensiveDensity fresh = sampling::defensive_weights(
      traj.pool_x, theta, traj.epsilon, traj.marginal);
  Mat2 acc{};
  for (std::size_t i = 0; i < m; ++i) {
    const auto& d = traj.draws[i];
    const Vec2 score = model::quad_loss(theta, d.x, traj.labels[i]).grad;
    const double weight =
        d.likelihood_ratio * fresh.likelihood_ratio[d.index];
    acc += Mat2::outer(score, score) * weight;
  }
  return acc * (1.0 / static_cast<double>(m));
}

CovariancePack g_hat(const estimators::IsalTrajectory& traj, std::size_t m) {
  check_prefix(traj, m);
  const model::FragilityParams theta = traj.fits[m].theta;
  CovariancePack pack;
  pack.n = m;
  pack.r_ddot_hat = hessian_plug_in(traj, m, theta);
  pack.v_hat = score_outer_plug_in(traj, m, theta);
  const Mat2 inv = checked_inverse(pack.r_ddot_hat, "g_hat");
  pack.g_hat = sandwich(inv, pack.v_hat);
  return pack;
}

Ellipsoid ellipsoid(const model::FragilityParams& center,
                    const CovariancePack& pack, double xi) {
  return ellipsoid_from_cov(center, pack.g_hat, pack.n, xi);
}

Ellipsoid ellipsoid_from_cov(const model::FragilityParams& center,
                             const Mat2& cov, std::size_t n, double xi) {
  if (!(xi > 0.0 && xi < 1.0))
    throw std::domain_error("ellipsoid: level outside (0,1)");
  if (n == 0) throw std::invalid_argument("ellipsoid: n = 0");
  Ellipsoid e;
  e.center = center;
  e.shape = cov * (1.0 / static_cast<double>(n));
  e.shape_inv = checked_inverse(e.shape, "ellipsoid");
  e.level = xi;
  e.chi2_threshold = chi2_quantile(2, xi);
  return e;
}

ConvergenceVerdict w_statistic(const estimators::IsalTrajectory& run1,
                               const estimators::IsalTrajectory& run2,
                               std::size_t m, double xi) {
  check_prefix(run1, m);
  check_prefix(run2, m);
  if (run1.epsilon != run2.epsilon)
    throw std::invalid_argument("w_statistic: runs with different epsilon");
  if (!(xi > 0.0 && xi < 1.0))
    throw std::domain_error("w_statistic: level outside (0,1)");

  const model::FragilityParams t1 = run1.fits[m].theta;
  const model::FragilityParams t2 = run2.fits[m].theta;

  const estimators::WeightedDataset d1 = run1.prefix(m);
  const estimators::WeightedDataset d2 = run2.prefix(m);
  const Vec2 delta = estimators::regularized_risk_grad(d1, t2, run1.reg) -
                     estimators::regularized_risk_grad(d2, t1, run2.reg);

  const Mat2 v12 = (score_outer_plug_in(run1, m, t1) +
                    score_outer_plug_in(run2, m, t2)) *
                   0.5;
  const Mat2 v12_inv = checked_inverse(v12, "w_statistic");

  ConvergenceVerdict out;
  out.w_n = static_cast<double>(m) / 8.0 * delta.dot(v12_inv * delta);
  out.threshold = chi2_quantile(2, 1.0 - xi);
  out.reject = out.w_n > out.threshold;
  return out;
}

CombinedRuns combine_runs(const estimators::IsalTrajectory& run1,
                          const estimators::IsalTrajectory& run2,
                          std::size_t m) {
  check_prefix(run1, m);
  check_prefix(run2, m);
  if (run1.epsilon != run2.epsilon)
    throw std::invalid_argument("combine_runs: runs with different epsilon");

  const model::FragilityParams t1 = run1.fits[m].theta;
  const model::FragilityParams t2 = run2.fits[m].theta;

  CombinedRuns out;
  out.theta_12 = {0.5 * (t1.alpha + t2.alpha), 0.5 * (t1.beta + t2.beta)};
  out.pack_12.n = m;
  out.pack_12.r_ddot_hat =
      (hessian_plug_in(run1, m, t1) + hessian_plug_in(run2, m, t2)) * 0.5;
  out.pack_12.v_hat = (score_outer_plug_in(run1, m, t1) +
                       score_outer_plug_in(run2, m, t2)) *
                      0.5;
  const Mat2 inv = checked_inverse(out.pack_12.r_ddot_hat, "combine_runs");
  out.pack_12.g_hat = sandwich(inv, out.pack_12.v_hat);
  return out;
}

Ellipsoid combined_ellipsoid(const CombinedRuns& combined, double xi) {
  return ellipsoid_from_cov(combined.theta_12, combined.pack_12.g_hat,
                            2 * combined.pack_12.n, xi);
}

}  // namespace fragal::inference
