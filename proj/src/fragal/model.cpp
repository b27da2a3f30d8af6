#include "model.hpp"

namespace fragal::model {

namespace {

struct ProbDerivs {
  double f;       // Phi(z)
  Vec2 grad;      // df/dtheta
  Mat2 hess;      // d2f/dtheta2 (symmetric)
};

// Chain rule through z = (x - log alpha)/beta:
//   dz/dalpha = -1/(alpha beta)           dz/dbeta = -z/beta
//   d2z/dalpha2 = 1/(alpha^2 beta)        d2z/dalpha dbeta = 1/(alpha beta^2)
//   d2z/dbeta2 = 2z/beta^2
// and Phi'' = -z phi, so d2f = phi * (grad2_z - z * gradz gradz^T).
ProbDerivs prob_derivs(const FragilityParams& theta, double x) {
  const double a = theta.alpha;
  const double b = theta.beta;
  const double z = (x - std::log(a)) / b;
  const double f = normal_cdf(z);
  const double phi = normal_pdf(z);

  const Vec2 dz{-1.0 / (a * b), -z / b};
  const Mat2 d2z{1.0 / (a * a * b), 1.0 / (a * b * b),
                 1.0 / (a * b * b), 2.0 * z / (b * b)};

  ProbDerivs out;
  out.f = f;
  out.grad = dz * phi;
  out.hess = (d2z - Mat2::outer(dz, dz) * z) * phi;
  return out;
}

}  // namespace

Vec2 fragility_grad(const FragilityParams& theta, double x) {
  return prob_derivs(theta, x).grad;
}

LossBundle quad_loss(const FragilityParams& theta, double x, int s) {
  const ProbDerivs p = prob_derivs(theta, x);
  const double resid = static_cast<double>(s) - p.f;

  LossBundle out;
  out.value = resid * resid;
  out.grad = p.grad * (-2.0 * resid);
  out.hess = Mat2::outer(p.grad, p.grad) * 2.0 - p.hess * (2.0 * resid);
  return out;
}

LossBundle regularizer(const FragilityParams& theta,
                       const RegularizerConfig& cfg) {
  const double b = theta.beta;
  LossBundle out;
  out.value = cfg.beta_reg / b;
  out.grad = {0.0, -cfg.beta_reg / (b * b)};
  out.hess = {0.0, 0.0, 0.0, 2.0 * cfg.beta_reg / (b * b * b)};
  return out;
}

}  // namespace fragal::model
