#include "doctest.h"

#include <cmath>

#include "fragal/inference.hpp"
#include "fragal/rng.hpp"

using namespace fragal;
using estimators::IsalTrajectory;
using estimators::WeightedDataset;
using inference::CovariancePack;
using inference::Ellipsoid;
using inference::SingularHessianError;
using model::FragilityParams;
using model::ParamBounds;
using sampling::MarginalModel;

namespace {

constexpr double kXMean = -2.8134107167600364;
constexpr double kXSd = 1.3;

struct TestPool {
  std::vector<double> x;
  std::vector<int> s;
};

TestPool make_pool(std::size_t n, FragilityParams truth, std::uint64_t seed) {
  TestPool p;
  Rng rng(seed);
  p.x.resize(n);
  p.s.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.x[i] = rng.normal(kXMean, kXSd);
    p.s[i] = rng.uniform01() < model::fragility_prob(truth, p.x[i]) ? 1 : 0;
  }
  return p;
}

// Trajectory whose draws all come from the fixed density q_{theta_draw,eps}
// (no refits); fits[m].theta is pinned to theta_fit for every m.
IsalTrajectory fixed_density_run(const TestPool& pool,
                                 const FragilityParams& theta_draw,
                                 const FragilityParams& theta_fit, double eps,
                                 std::size_t m, std::uint64_t seed) {
  IsalTrajectory traj;
  traj.epsilon = eps;
  traj.warmup = m;
  traj.pool_x = pool.x;
  traj.marginal = MarginalModel::pool_empirical();
  const sampling::DefensiveDensity dens = sampling::defensive_weights(
      pool.x, theta_draw, eps, MarginalModel::pool_empirical());
  Rng rng(seed);
  estimators::FitResult fit;
  fit.theta = theta_fit;
  traj.fits.push_back(fit);
  for (std::size_t i = 0; i < m; ++i) {
    const auto rec = sampling::draw(dens, rng);
    traj.draws.push_back(rec);
    traj.labels.push_back(pool.s[rec.index]);
    traj.fits.push_back(fit);
  }
  return traj;
}

// Exact finite-pool expectation of the doubly weighted score outer product:
// sum_i q'_i * ratio'_i * ratio_i(theta) * grad grad^T at (x_i, s_i).
Mat2 exact_score_outer(const TestPool& pool, const FragilityParams& theta_draw,
                       const FragilityParams& theta_eval, double eps) {
  const auto d_draw = sampling::defensive_weights(
      pool.x, theta_draw, eps, MarginalModel::pool_empirical());
  const auto d_eval = sampling::defensive_weights(
      pool.x, theta_eval, eps, MarginalModel::pool_empirical());
  Mat2 acc{};
  for (std::size_t i = 0; i < pool.x.size(); ++i) {
    const Vec2 g = model::quad_loss(theta_eval, pool.x[i], pool.s[i]).grad;
    acc += Mat2::outer(g, g) *
           (d_draw.draw_prob[i] * d_draw.likelihood_ratio[i] *
            d_eval.likelihood_ratio[i]);
  }
  return acc;
}

}  // namespace

TEST_CASE("hessian_plug_in: eps = 1 equals the plain empirical Hessian") {
  const TestPool pool = make_pool(2000, {0.3, 0.4}, 11);
  const FragilityParams theta{0.31, 0.42};
  const IsalTrajectory traj =
      fixed_density_run(pool, theta, theta, 1.0, 500, 12);
  const Mat2 plug = inference::hessian_plug_in(traj, 500, theta);
  Mat2 direct{};
  for (std::size_t i = 0; i < 500; ++i)
    direct += model::quad_loss(theta, traj.draws[i].x, traj.labels[i]).hess;
  direct = direct * (1.0 / 500.0);
  CHECK((plug - direct).frobenius() <= 1e-14 * (1.0 + direct.frobenius()));
}

TEST_CASE("hessian_plug_in: converges to the quadrature Hessian of the risk") {
  // E_P[l''] under the analytic marginal, s-sum inside a 1-D quadrature.
  const FragilityParams star{0.3, 0.4};
  const MarginalModel marg = MarginalModel::analytic_gaussian(kXMean, kXSd * kXSd);
  auto entry = [&](int which) {
    return integrate_adaptive(
        [&](double x) {
          const double mu = model::fragility_prob(star, x);
          const Mat2 h1 = model::quad_loss(star, x, 1).hess;
          const Mat2 h0 = model::quad_loss(star, x, 0).hess;
          const Mat2 h = h1 * mu + h0 * (1.0 - mu);
          const double v = which == 0 ? h.a11 : (which == 1 ? h.a12 : h.a22);
          return marg.density(x) * v;
        },
        kXMean - 8.0 * kXSd, kXMean + 8.0 * kXSd, 1e-9);
  };
  const Mat2 r_dd{entry(0), entry(1), entry(1), entry(2)};

  const TestPool pool = make_pool(10000, star, 21);
  const IsalTrajectory traj = fixed_density_run(pool, star, star, 1e-3, 10000, 22);
  const Mat2 plug = inference::hessian_plug_in(traj, 10000, star);
  CHECK((plug - r_dd).frobenius() / r_dd.frobenius() < 0.05);
}

TEST_CASE("hessian_plug_in: rank deficiency raises SingularHessian") {
  TestPool pool;
  pool.x = {std::log(0.3) + 30.0};  // deep in the f = 1 plateau
  pool.s = {1};
  const FragilityParams theta{0.3, 0.4};
  const IsalTrajectory traj = fixed_density_run(pool, theta, theta, 1.0, 1, 31);
  CHECK_THROWS_AS((void)inference::hessian_plug_in(traj, 1, theta),
                  SingularHessianError);
}

TEST_CASE("score_outer_plug_in: zero scores, eps = 1 reduction, double ratio") {
  // Zero scores on the plateau.
  TestPool flat;
  flat.x = {std::log(0.3) + 10.0, std::log(0.3) + 12.0};
  flat.s = {1, 1};
  const FragilityParams theta{0.3, 0.4};
  const IsalTrajectory tflat = fixed_density_run(flat, theta, theta, 1.0, 2, 41);
  const Mat2 zero = inference::score_outer_plug_in(tflat, 2, theta);
  CHECK(zero.frobenius() == 0.0);

  // eps = 1: reduces to the plain outer-product mean.
  const TestPool pool = make_pool(3000, {0.3, 0.4}, 42);
  const IsalTrajectory t1 = fixed_density_run(pool, theta, theta, 1.0, 800, 43);
  const Mat2 v1 = inference::score_outer_plug_in(t1, 800, theta);
  Mat2 direct{};
  for (std::size_t i = 0; i < 800; ++i) {
    const Vec2 g = model::quad_loss(theta, t1.draws[i].x, t1.labels[i]).grad;
    direct += Mat2::outer(g, g);
  }
  direct = direct * (1.0 / 800.0);
  CHECK((v1 - direct).frobenius() <= 1e-14 * (1.0 + direct.frobenius()));

  // Monte Carlo draws against the exact finite-pool expectation, with the
  // evaluation parameter different from the draw parameter (double ratio).
  const FragilityParams draw_at{0.35, 0.5};
  const FragilityParams eval_at{0.3, 0.4};
  const IsalTrajectory t2 =
      fixed_density_run(pool, draw_at, eval_at, 1e-2, 20000, 44);
  const Mat2 v2 = inference::score_outer_plug_in(t2, 20000, eval_at);
  const Mat2 exact = exact_score_outer(pool, draw_at, eval_at, 1e-2);
  CHECK((v2 - exact).frobenius() / exact.frobenius() < 0.10);
  // PSD.
  const auto ev = eigvals_sym(v2);
  CHECK(ev[0] >= -1e-10);
}

TEST_CASE("g_hat: eps = 1 equals the i.i.d. sandwich estimator exactly") {
  const TestPool pool = make_pool(4000, {0.3, 0.4}, 51);
  const ParamBounds bounds;
  Rng rng(52);
  const IsalTrajectory traj = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(),
      [&pool](std::size_t i) { return pool.s[i]; }, {0.3, 0.4}, 400, 20, 1.0,
      {0.0}, bounds, rng);
  const CovariancePack pack = inference::g_hat(traj, 400);
  const FragilityParams theta = traj.fits[400].theta;

  Mat2 a{}, b{};
  for (std::size_t i = 0; i < 400; ++i) {
    const auto l = model::quad_loss(theta, traj.draws[i].x, traj.labels[i]);
    a += l.hess;
    b += Mat2::outer(l.grad, l.grad);
  }
  a = a * (1.0 / 400.0);
  b = b * (1.0 / 400.0);
  const Mat2 sandwich = a.inverse() * b * a.inverse().transpose();
  CHECK((pack.g_hat - sandwich).frobenius() <=
        1e-10 * (1.0 + sandwich.frobenius()));
  CHECK(pack.v_hat.is_symmetric(1e-10));
  CHECK(pack.r_ddot_hat.is_symmetric(1e-10));
}

TEST_CASE("sandwich scale identity (pure algebra)") {
  const Mat2 a{0.8, 0.2, 0.2, 1.4};
  const Mat2 v{0.5, 0.1, 0.1, 0.9};
  auto sandwich = [](const Mat2& r, const Mat2& vv) {
    return r.inverse() * vv * r.inverse().transpose();
  };
  const Mat2 g1 = sandwich(a, v);
  const double c = 3.7;
  const Mat2 g2 = sandwich(a * c, v * c);
  CHECK((g2 - g1 * (1.0 / c)).frobenius() <= 1e-12 * g1.frobenius());
}

TEST_CASE("ellipsoid geometry") {
  CovariancePack pack;
  pack.g_hat = Mat2::identity();
  pack.r_ddot_hat = Mat2::identity();
  pack.v_hat = Mat2::identity();
  pack.n = 1;
  const FragilityParams center{0.3, 0.4};
  const Ellipsoid e = inference::ellipsoid(center, pack, 0.9);
  CHECK(e.contains(center));
  // Boundary: delta^2 < chi2(2) 0.9-quantile = 4.60517.
  const double edge = std::sqrt(4.605170185988091);
  CHECK(e.contains({center.alpha + edge - 1e-6, center.beta}));
  CHECK(!e.contains({center.alpha + edge + 1e-6, center.beta}));
  // Quadratic-form positivity off the center.
  Rng rng(61);
  for (int i = 0; i < 100; ++i) {
    const FragilityParams t{center.alpha + rng.normal(0, 1),
                            center.beta + rng.normal(0, 1)};
    const Vec2 d{t.alpha - center.alpha, t.beta - center.beta};
    if (d.norm() > 0) CHECK(d.dot(e.shape_inv * d) > 0.0);
  }

  // CEV with G = diag(4, 9), n = 100 -> det = 36 / 1e4.
  const Mat2 g49 = Mat2::diag(4.0, 9.0);
  const Ellipsoid e2 = inference::ellipsoid_from_cov(center, g49, 100, 0.9);
  CHECK(e2.volume() == doctest::Approx(3.6e-3).epsilon(1e-12));

  CHECK_THROWS_AS(
      (void)inference::ellipsoid_from_cov(center, Mat2::diag(1.0, 0.0), 10, 0.9),
      SingularHessianError);
}

TEST_CASE("w_statistic: duplicate runs give W = 0, swap symmetry holds") {
  const TestPool pool = make_pool(3000, {0.3, 0.4}, 71);
  const ParamBounds bounds;
  auto oracle = [&pool](std::size_t i) { return pool.s[i]; };
  Rng r1(72), r2(73);
  const IsalTrajectory run1 = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle, {0.3, 0.4}, 150, 20,
      1e-3, {0.01}, bounds, r1);
  const IsalTrajectory run2 = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle, {0.3, 0.4}, 150, 20,
      1e-3, {0.01}, bounds, r2);

  const auto self = inference::w_statistic(run1, run1, 150, 0.1);
  CHECK(self.w_n == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(!self.reject);
  CHECK(self.threshold == doctest::Approx(4.605170185988091).epsilon(1e-12));

  const auto w12 = inference::w_statistic(run1, run2, 150, 0.1);
  const auto w21 = inference::w_statistic(run2, run1, 150, 0.1);
  CHECK(w12.w_n == doctest::Approx(w21.w_n).epsilon(1e-10));
  CHECK(w12.w_n >= 0.0);

  // Mismatched epsilon is rejected.
  Rng r3(74);
  const IsalTrajectory other = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle, {0.3, 0.4}, 150, 20,
      1e-2, {0.01}, bounds, r3);
  CHECK_THROWS_AS((void)inference::w_statistic(run1, other, 150, 0.1),
                  std::invalid_argument);
}

TEST_CASE("combine_runs: midpoint estimate and doubled-sample ellipsoid") {
  const TestPool pool = make_pool(3000, {0.3, 0.4}, 81);
  const ParamBounds bounds;
  auto oracle = [&pool](std::size_t i) { return pool.s[i]; };
  Rng r1(82), r2(83);
  const IsalTrajectory run1 = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle, {0.3, 0.4}, 150, 20,
      1e-3, {0.01}, bounds, r1);
  const IsalTrajectory run2 = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle, {0.3, 0.4}, 150, 20,
      1e-3, {0.01}, bounds, r2);

  const auto cr = inference::combine_runs(run1, run2, 150);
  CHECK(cr.theta_12.alpha ==
        doctest::Approx(0.5 * (run1.fits[150].theta.alpha +
                               run2.fits[150].theta.alpha)).epsilon(1e-14));
  CHECK(cr.theta_12.beta ==
        doctest::Approx(0.5 * (run1.fits[150].theta.beta +
                               run2.fits[150].theta.beta)).epsilon(1e-14));

  const auto self = inference::combine_runs(run1, run1, 150);
  CHECK(self.theta_12.alpha == run1.fits[150].theta.alpha);
  CHECK(self.theta_12.beta == run1.fits[150].theta.beta);

  const auto e12 = inference::combined_ellipsoid(cr, 0.9);
  CHECK(e12.contains(cr.theta_12));
  // Shape uses 2n: volume is det(G12)/(2n)^2.
  CHECK(e12.volume() ==
        doctest::Approx(cr.pack_12.g_hat.det() / (300.0 * 300.0))
            .epsilon(1e-12));
}

TEST_CASE("midpoint arithmetic example") {
  // Two runs whose final fits are pinned; combined estimate is the mean.
  const TestPool pool = make_pool(500, {0.3, 0.4}, 91);
  const IsalTrajectory a =
      fixed_density_run(pool, {0.3, 0.4}, {0.3, 0.4}, 1e-2, 50, 92);
  const IsalTrajectory b =
      fixed_density_run(pool, {0.3, 0.4}, {0.32, 0.44}, 1e-2, 50, 93);
  const auto cr = inference::combine_runs(a, b, 50);
  CHECK(cr.theta_12.alpha == doctest::Approx(0.31).epsilon(1e-14));
  CHECK(cr.theta_12.beta == doctest::Approx(0.42).epsilon(1e-14));
}
