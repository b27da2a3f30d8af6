#include "doctest.h"

#include <cmath>
#include <set>

#include "fragal/estimators.hpp"
#include "fragal/rng.hpp"

using namespace fragal;
using estimators::FitResult;
using estimators::IsalTrajectory;
using estimators::WeightedDataset;
using model::FragilityParams;
using model::ParamBounds;
using model::RegularizerConfig;
using sampling::MarginalModel;

namespace {

constexpr double kXMean = -2.8134107167600364;  // log(0.3/5)
constexpr double kXSd = 1.3;

// Pool with pre-assigned Bernoulli labels under theta_true.
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

WeightedDataset to_dataset(const TestPool& p) {
  WeightedDataset d;
  for (std::size_t i = 0; i < p.x.size(); ++i) d.push(p.x[i], p.s[i], 1.0);
  return d;
}

estimators::LabelOracle oracle_of(const TestPool& p) {
  return [&p](std::size_t i) { return p.s[i]; };
}

}  // namespace

TEST_CASE("minimize: large-sample consistency") {
  const FragilityParams truth{0.3, 0.4};
  const TestPool pool = make_pool(10000, truth, 404);
  const WeightedDataset data = to_dataset(pool);
  const ParamBounds bounds;
  const FitResult fit = estimators::minimize_regularized_risk(
      data, {0.0}, bounds, {1.0, 1.0});
  CHECK(std::fabs(fit.theta.alpha - 0.3) < 0.01);
  CHECK(std::fabs(fit.theta.beta - 0.4) < 0.02);
  CHECK(!fit.boundary);
  CHECK(fit.converged);
  // risk_value recomputable bit-for-bit.
  CHECK(fit.risk_value ==
        estimators::regularized_risk(data, fit.theta, {0.0}));
}

TEST_CASE("minimize: single point is degenerate (boundary flagged)") {
  WeightedDataset d;
  d.push(std::log(0.6), 1, 1.0);
  const ParamBounds bounds;
  const FitResult fit =
      estimators::minimize_regularized_risk(d, {0.0}, bounds, {0.3, 0.4});
  CHECK(fit.boundary);
  CHECK(fit.all_same_label);
}

TEST_CASE("minimize: regularizer pushes beta off the lower bound") {
  // Separable 10-point set: all failures above the threshold, none below.
  WeightedDataset d;
  for (int i = 0; i < 5; ++i) d.push(std::log(0.3) - 0.5 - 0.1 * i, 0, 1.0);
  for (int i = 0; i < 5; ++i) d.push(std::log(0.3) + 0.5 + 0.1 * i, 1, 1.0);
  const ParamBounds bounds;
  const FitResult flat =
      estimators::minimize_regularized_risk(d, {0.0}, bounds, {0.3, 0.4});
  const FitResult reg =
      estimators::minimize_regularized_risk(d, {0.1}, bounds, {0.3, 0.4});
  CHECK(flat.theta.beta <= bounds.beta_lo * (1.0 + 1e-6));
  CHECK(reg.theta.beta > bounds.beta_lo * 1.5);
  CHECK(reg.theta.beta > flat.theta.beta);
}

TEST_CASE("optimizer oracle: 400x400 grid scan never beats the minimizer") {
  const ParamBounds bounds;
  Rng rng(2024);
  for (int ds = 0; ds < 20; ++ds) {
    const FragilityParams truth{std::exp(rng.uniform(std::log(0.05), std::log(2.0))),
                                rng.uniform(0.1, 1.0)};
    const TestPool pool = make_pool(40, truth, 3000 + ds);
    const WeightedDataset data = to_dataset(pool);
    const RegularizerConfig reg{(ds % 2 == 0) ? 0.0 : 0.01};
    const FitResult fit = estimators::minimize_regularized_risk(
        data, reg, bounds, {1.0, 0.5});

    double grid_min = std::numeric_limits<double>::infinity();
    const double la0 = std::log(bounds.alpha_lo), la1 = std::log(bounds.alpha_hi);
    const double lb0 = std::log(bounds.beta_lo), lb1 = std::log(bounds.beta_hi);
    for (int i = 0; i < 400; ++i) {
      const double a = std::exp(la0 + (la1 - la0) * i / 399.0);
      for (int j = 0; j < 400; ++j) {
        const double b = std::exp(lb0 + (lb1 - lb0) * j / 399.0);
        grid_min = std::min(
            grid_min, estimators::regularized_risk(data, {a, b}, reg));
      }
    }
    CHECK(grid_min >= fit.risk_value - 1e-6);
  }
}

TEST_CASE("mle_fit: separation, consistency, single point") {
  const ParamBounds bounds;
  // Perfectly separated -> degenerate step curve, beta at the lower bound.
  WeightedDataset sep;
  for (int i = 0; i < 10; ++i) sep.push(std::log(0.3) - 0.3 - 0.05 * i, 0, 1.0);
  for (int i = 0; i < 10; ++i) sep.push(std::log(0.3) + 0.3 + 0.05 * i, 1, 1.0);
  const FitResult fsep = estimators::mle_fit(sep, bounds, {0.3, 0.4});
  CHECK(fsep.theta.beta <= bounds.beta_lo * (1.0 + 1e-6));
  CHECK(fsep.boundary);

  // Well-specified consistency at n = 1e4.
  const TestPool pool = make_pool(10000, {0.3, 0.4}, 404);
  const FitResult fit =
      estimators::mle_fit(to_dataset(pool), bounds, {1.0, 1.0});
  CHECK(std::fabs(fit.theta.alpha - 0.3) < 0.01);
  CHECK(std::fabs(fit.theta.beta - 0.4) < 0.02);

  // A single failure pushes the curve up: alpha at its lower bound.
  WeightedDataset one;
  one.push(std::log(0.6), 1, 1.0);
  const FitResult fone = estimators::mle_fit(one, bounds, {0.3, 0.4});
  CHECK(fone.theta.alpha <= bounds.alpha_lo * (1.0 + 1e-5));
  CHECK(fone.boundary);
  CHECK(fone.all_same_label);
}

TEST_CASE("isal_run: eps = 1 reproduces rs_run draw for draw") {
  const TestPool pool = make_pool(800, {0.3, 0.4}, 51);
  const ParamBounds bounds;
  const RegularizerConfig reg{0.01};
  const FragilityParams center{std::sqrt(bounds.alpha_lo * bounds.alpha_hi),
                               std::sqrt(bounds.beta_lo * bounds.beta_hi)};
  Rng r1(777), r2(777);
  const IsalTrajectory a = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle_of(pool), center, 60,
      20, 1.0, reg, bounds, r1);
  const IsalTrajectory b =
      estimators::rs_run(pool.x, MarginalModel::pool_empirical(),
                         oracle_of(pool), 60, 20, reg, bounds, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.draws[i].index == b.draws[i].index);
    CHECK(a.draws[i].likelihood_ratio == 1.0);
    CHECK(a.labels[i] == b.labels[i]);
    CHECK(a.fits[i + 1].theta.alpha == b.fits[i + 1].theta.alpha);
    CHECK(a.fits[i + 1].theta.beta == b.fits[i + 1].theta.beta);
    CHECK(a.fits[i + 1].risk_value == b.fits[i + 1].risk_value);
  }
}

TEST_CASE("isal_run: synthetic-case run keeps ratios bounded and interior fit") {
  const TestPool pool = make_pool(5000, {0.3, 0.4}, 61);
  const ParamBounds bounds;
  Rng rng(42);
  const IsalTrajectory traj = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle_of(pool), {0.35, 0.45},
      120, 20, 1e-3, {0.01}, bounds, rng);
  REQUIRE(traj.size() == 120);
  for (const auto& d : traj.draws) CHECK(d.likelihood_ratio < 1000.0);
  const FitResult& last = traj.fits[120];
  CHECK(!last.boundary);
  CHECK(bounds.contains(last.theta));
  // Warmup draws came from the theta0 density.
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(traj.draws[i].theta_at_draw.alpha == 0.35);
    CHECK(traj.draws[i].theta_at_draw.beta == 0.45);
  }
  // Post-warmup draws use the latest refit.
  for (std::size_t i = 20; i < 120; ++i) {
    CHECK(traj.draws[i].theta_at_draw.alpha ==
          traj.fits[i].theta.alpha);
  }
}

TEST_CASE("isal_run: degenerate step-function truth completes on the boundary") {
  TestPool pool;
  Rng rng(71);
  pool.x.resize(3000);
  pool.s.resize(3000);
  for (std::size_t i = 0; i < pool.x.size(); ++i) {
    pool.x[i] = rng.normal(kXMean, kXSd);
    pool.s[i] = pool.x[i] > std::log(0.3) ? 1 : 0;
  }
  const ParamBounds bounds;

  // beta_reg by LOO on a 20-point init sample, as in the full procedure.
  WeightedDataset init;
  Rng ri(72);
  for (int i = 0; i < 20; ++i) {
    const std::size_t idx = ri.uniform_index(pool.x.size());
    init.push(pool.x[idx], pool.s[idx], 1.0);
  }
  const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1};
  const RegularizerConfig reg =
      estimators::loo_select_beta_reg(init, grid, bounds);

  Rng rr(73);
  const IsalTrajectory traj = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle_of(pool), {0.3, 0.2},
      120, 20, 1e-3, reg, bounds, rr);
  const FitResult& last = traj.fits[120];
  CHECK(last.theta.beta < 0.1);  // at or near the lower bound
  CHECK(last.n == 120);
}

TEST_CASE("isal_run: oracle accounting matches distinct drawn indices") {
  const TestPool pool = make_pool(200, {0.3, 0.4}, 81);
  const ParamBounds bounds;
  Rng rng(82);
  const IsalTrajectory traj = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle_of(pool), {0.3, 0.4},
      80, 20, 1e-2, {0.01}, bounds, rng);
  std::set<std::size_t> distinct;
  for (const auto& d : traj.draws) distinct.insert(d.index);
  CHECK(traj.oracle_calls == distinct.size());
}

TEST_CASE("isal_run: refit improves the objective over the initialization") {
  const TestPool pool = make_pool(2000, {0.3, 0.4}, 91);
  const ParamBounds bounds;
  Rng rng(92);
  const IsalTrajectory traj = estimators::isal_run(
      pool.x, MarginalModel::pool_empirical(), oracle_of(pool), {1.0, 1.0},
      100, 20, 1e-3, {0.01}, bounds, rng);
  const WeightedDataset final_data = traj.prefix(100);
  const double at_fit =
      estimators::regularized_risk(final_data, traj.fits[100].theta, traj.reg);
  const double at_init =
      estimators::regularized_risk(final_data, traj.fits[0].theta, traj.reg);
  CHECK(at_fit <= at_init + 1e-12);
}

TEST_CASE("isal_run: rs n = n0 equals a plain fit of the drawn set") {
  const TestPool pool = make_pool(500, {0.3, 0.4}, 95);
  const ParamBounds bounds;
  const RegularizerConfig reg{0.01};
  Rng rng(96);
  const IsalTrajectory traj =
      estimators::rs_run(pool.x, MarginalModel::pool_empirical(),
                         oracle_of(pool), 20, 20, reg, bounds, rng);
  const WeightedDataset d = traj.prefix(20);
  const FitResult direct = estimators::minimize_regularized_risk(
      d, reg, bounds, traj.fits[19].theta);
  CHECK(traj.fits[20].risk_value ==
        doctest::Approx(direct.risk_value).epsilon(1e-10));
}

TEST_CASE("isal_run: oracle failure carries the pool index") {
  const TestPool pool = make_pool(50, {0.3, 0.4}, 97);
  const ParamBounds bounds;
  Rng rng(98);
  auto bad_oracle = [](std::size_t) -> int {
    throw std::runtime_error("simulator exploded");
  };
  CHECK_THROWS_WITH_AS(
      (void)estimators::isal_run(pool.x, MarginalModel::pool_empirical(),
                                 bad_oracle, {0.3, 0.4}, 10, 5, 1e-2, {0.0},
                                 bounds, rng),
      doctest::Contains("pool index"), std::runtime_error);
}

TEST_CASE("loo_select_beta_reg edge cases") {
  const ParamBounds bounds;
  WeightedDataset init;
  Rng rng(200);
  for (int i = 0; i < 20; ++i) {
    const double x = rng.normal(kXMean, kXSd);
    init.push(x, rng.uniform01() < model::fragility_prob({0.3, 0.4}, x) ? 1 : 0,
              1.0);
  }
  // Grid of one element -> that element.
  const std::vector<double> one{0.005};
  CHECK(estimators::loo_select_beta_reg(init, one, bounds).beta_reg == 0.005);

  // All labels identical -> midpoint fallback with flag.
  WeightedDataset same;
  for (int i = 0; i < 10; ++i) same.push(kXMean + 0.1 * i, 0, 1.0);
  bool degenerate = false;
  const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1};
  const model::RegularizerConfig pick =
      estimators::loo_select_beta_reg(same, grid, bounds, &degenerate);
  CHECK(degenerate);
  CHECK(pick.beta_reg == 1e-2);

  CHECK_THROWS_AS((void)estimators::loo_select_beta_reg(
                      WeightedDataset{}, grid, bounds),
                  std::invalid_argument);
}

TEST_CASE("loo_select_beta_reg varies across seeded init sets") {
  const ParamBounds bounds;
  const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1};
  std::set<double> picks;
  for (int s = 0; s < 20; ++s) {
    WeightedDataset init;
    Rng rng(500 + s);
    for (int i = 0; i < 20; ++i) {
      const double x = rng.normal(kXMean, kXSd);
      init.push(x,
                rng.uniform01() < model::fragility_prob({0.3, 0.4}, x) ? 1 : 0,
                1.0);
    }
    picks.insert(estimators::loo_select_beta_reg(init, grid, bounds).beta_reg);
  }
  CHECK(picks.size() >= 2);  // selection reacts to the data
}
