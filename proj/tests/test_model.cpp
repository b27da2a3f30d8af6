#include "doctest.h"

#include <cmath>

#include "fragal/model.hpp"
#include "fragal/rng.hpp"
#include "oracle_utils.hpp"

using namespace fragal;
using model::FragilityParams;
using model::LossBundle;
using model::ParamBounds;
using model::RegularizerConfig;

namespace {

FragilityParams random_theta(Rng& rng, const ParamBounds& b) {
  // Log-uniform over the box, matching how the optimizer explores it.
  return {std::exp(rng.uniform(std::log(b.alpha_lo), std::log(b.alpha_hi))),
          std::exp(rng.uniform(std::log(b.beta_lo), std::log(b.beta_hi)))};
}

}  // namespace

TEST_CASE("fragility_prob reference values") {
  const FragilityParams t{0.3, 0.4};
  CHECK(model::fragility_prob(t, std::log(0.3)) == 0.5);
  // Phi(1) via the series oracle.
  const double phi1 = oracle::normal_cdf_series(1.0);
  CHECK(model::fragility_prob(t, std::log(0.3) + 0.4) ==
        doctest::Approx(phi1).epsilon(1e-12));
  CHECK(model::fragility_prob(t, std::log(0.3) + 0.4) ==
        doctest::Approx(0.841345).epsilon(1e-6));
  CHECK(model::fragility_prob(t, -745.0) == 0.0);
  CHECK(model::fragility_prob(t, 745.0) == 1.0);
  // Complement path agrees.
  CHECK(model::fragility_sf(t, 0.1) ==
        doctest::Approx(1.0 - model::fragility_prob(t, 0.1)).epsilon(1e-14));
}

TEST_CASE("fragility_prob monotonicity (analytic partial signs on a grid)") {
  const ParamBounds bounds;
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const FragilityParams t = random_theta(rng, bounds);
    const double x = rng.uniform(-6.0, 3.0);
    const double la = std::log(t.alpha);
    const Vec2 g = model::fragility_grad(t, x);
    CHECK(g.x <= 0.0);  // nonincreasing in alpha
    if (x > la) CHECK(g.y <= 0.0);
    if (x < la) CHECK(g.y >= 0.0);
    // Nondecreasing in x.
    const double step = 1e-3;
    CHECK(model::fragility_prob(t, x + step) >=
          model::fragility_prob(t, x) - 1e-15);
  }
}

TEST_CASE("quad_loss reference values and symmetry") {
  const FragilityParams t{0.3, 0.4};
  const double x_half = std::log(0.3);  // f = 0.5 exactly
  const LossBundle l1 = model::quad_loss(t, x_half, 1);
  const LossBundle l0 = model::quad_loss(t, x_half, 0);
  CHECK(l1.value == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(l0.value == doctest::Approx(0.25).epsilon(1e-15));
  // s <-> 1-s at f = 1/2 flips the residual sign only: gradients negate.
  CHECK(l0.grad.x == doctest::Approx(-l1.grad.x).epsilon(1e-12));
  CHECK(l0.grad.y == doctest::Approx(-l1.grad.y).epsilon(1e-12));
}

TEST_CASE("quad_loss value stays in [0,1] and hessian is symmetric") {
  const ParamBounds bounds;
  Rng rng(29);
  for (int trial = 0; trial < 2000; ++trial) {
    const FragilityParams t = random_theta(rng, bounds);
    const double x = rng.uniform(-6.0, 3.0);
    const int s = rng.uniform01() < 0.5 ? 0 : 1;
    const LossBundle l = model::quad_loss(t, x, s);
    CHECK(l.value >= 0.0);
    CHECK(l.value <= 1.0);
    CHECK(l.hess.is_symmetric());
  }
}

TEST_CASE("gradients match finite differences of the value (spec example)") {
  const FragilityParams t{0.3, 0.4};
  const double x = std::log(0.6);
  const LossBundle l = model::quad_loss(t, x, 1);
  const Vec2 fd = oracle::grad_fd(
      [&](const FragilityParams& th) { return model::quad_loss(th, x, 1).value; },
      t);
  CHECK(l.grad.x == doctest::Approx(fd.x).epsilon(1e-5));
  CHECK(l.grad.y == doctest::Approx(fd.y).epsilon(1e-5));
}

// Randomized differentiation audit: gradients against value differences,
// Hessians against gradient differences, both with h = 1e-6 * scale.
TEST_CASE("10^4 randomized finite-difference checks at rel error < 1e-4") {
  const ParamBounds bounds;
  Rng rng(4243);
  int checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const FragilityParams t = random_theta(rng, bounds);
    const double x = rng.uniform(-6.0, 3.0);
    const int s = rng.uniform01() < 0.5 ? 0 : 1;
    const double breg = rng.uniform(0.0, 0.1);
    const RegularizerConfig reg{breg};

    auto value = [&](const FragilityParams& th) {
      return model::quad_loss(th, x, s).value +
             model::regularizer(th, reg).value;
    };
    auto grad = [&](const FragilityParams& th) {
      const LossBundle a = model::quad_loss(th, x, s);
      const LossBundle b = model::regularizer(th, reg);
      return a.grad + b.grad;
    };
    const Vec2 g = grad(t);
    const Mat2 h = model::quad_loss(t, x, s).hess +
                   model::regularizer(t, reg).hess;

    const Vec2 g_fd = oracle::grad_fd(value, t);
    const Mat2 h_fd = oracle::hess_fd(grad, t);

    const double gscale = std::max({std::fabs(g_fd.x), std::fabs(g_fd.y),
                                    1e-8});
    CHECK(std::fabs(g.x - g_fd.x) <= 1e-4 * gscale);
    CHECK(std::fabs(g.y - g_fd.y) <= 1e-4 * gscale);

    const double hscale = std::max(h_fd.frobenius(), 1e-8);
    CHECK((h - h_fd).frobenius() <= 1e-4 * hscale);
    ++checked;
  }
  CHECK(checked == 10000);
}

TEST_CASE("regularizer closed forms") {
  CHECK(model::regularizer({0.3, 0.4}, {0.0}).value == 0.0);
  CHECK(model::regularizer({0.3, 0.4}, {0.0}).grad.y == 0.0);
  CHECK(model::regularizer({1.0, 0.1}, {0.01}).value ==
        doctest::Approx(0.1).epsilon(1e-15));
  const LossBundle r = model::regularizer({1.0, 0.4}, {0.01});
  CHECK(r.value == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(r.grad.y == doctest::Approx(-0.0625).epsilon(1e-12));
  CHECK(r.grad.x == 0.0);
  CHECK(r.hess.a22 == doctest::Approx(2 * 0.01 / std::pow(0.4, 3)).epsilon(1e-12));
}

TEST_CASE("parameter bounds boundary detection") {
  const ParamBounds b;
  CHECK(b.contains({0.3, 0.4}));
  CHECK(!b.contains({0.3, 3.0}));
  CHECK(b.on_boundary({b.alpha_lo, 0.4}));
  CHECK(b.on_boundary({0.3, b.beta_hi}));
  CHECK(!b.on_boundary({0.3, 0.4}));
  const FragilityParams clamped = b.clamp({1e9, 1e-9});
  CHECK(clamped.alpha == b.alpha_hi);
  CHECK(clamped.beta == b.beta_lo);
}
