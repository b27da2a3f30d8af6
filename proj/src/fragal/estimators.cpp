#include "estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace fragal::estimators {

namespace {

// Optimization runs in u = (log alpha, log beta): the box spans several
// decades in alpha and the objective is far better conditioned there.

struct BoxU {
  double lo1, hi1, lo2, hi2;

  static BoxU from(const model::ParamBounds& b) {
    return {std::log(b.alpha_lo), std::log(b.alpha_hi), std::log(b.beta_lo),
            std::log(b.beta_hi)};
  }
  Vec2 clamp(const Vec2& u) const {
    return {std::min(std::max(u.x, lo1), hi1),
            std::min(std::max(u.y, lo2), hi2)};
  }
  Vec2 at_fractions(double fx, double fy) const {
    return {lo1 + fx * (hi1 - lo1), lo2 + fy * (hi2 - lo2)};
  }
};

model::FragilityParams params_from_u(const Vec2& u) {
  return {std::exp(u.x), std::exp(u.y)};
}
Vec2 u_from_params(const model::FragilityParams& t) {
  return {std::log(t.alpha), std::log(t.beta)};
}

// Fixed 4-point Latin hypercube over the box (stratum centers, fixed
// permutation); deterministic by construction.
std::array<Vec2, 4> lhs_starts(const BoxU& box) {
  static constexpr double fx[4] = {0.125, 0.375, 0.625, 0.875};
  static constexpr double fy[4] = {0.625, 0.125, 0.875, 0.375};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = box.at_fractions(fx[i], fy[i]);
  return out;
}

struct NmOutcome {
  Vec2 u{};
  double f = std::numeric_limits<double>::infinity();
  bool converged = false;
};

// Bounded Nelder-Mead: candidates are projected onto the box before
// evaluation. Convergence on relative objective spread across the simplex.
template <class F>
NmOutcome nelder_mead(const F& fn, Vec2 start, const BoxU& box,
                      double tol = 1e-9, int max_evals = 200) {
  start = box.clamp(start);
  const double h1 = 0.08 * (box.hi1 - box.lo1);
  const double h2 = 0.08 * (box.hi2 - box.lo2);
  std::array<Vec2, 3> pts = {
      start,
      box.clamp({start.x + (start.x + h1 > box.hi1 ? -h1 : h1), start.y}),
      box.clamp({start.x, start.y + (start.y + h2 > box.hi2 ? -h2 : h2)})};
  std::array<double, 3> fv;
  int evals = 0;
  for (int i = 0; i < 3; ++i) {
    fv[i] = fn(pts[i]);
    ++evals;
  }
  bool converged = false;
  while (evals < max_evals) {
    // Order: 0 best, 2 worst.
    std::array<int, 3> ord = {0, 1, 2};
    std::sort(ord.begin(), ord.end(),
              [&](int a, int b) { return fv[a] < fv[b]; });
    const int ib = ord[0], im = ord[1], iw = ord[2];
    if (fv[iw] - fv[ib] <= tol * (1.0 + std::fabs(fv[ib]))) {
      converged = true;
      break;
    }
    const Vec2 centroid = (pts[ib] + pts[im]) * 0.5;
    const Vec2 refl = box.clamp(centroid + (centroid - pts[iw]));
    const double fr = fn(refl);
    ++evals;
    if (fr < fv[ib]) {
      const Vec2 exp_pt = box.clamp(centroid + (centroid - pts[iw]) * 2.0);
      const double fe = fn(exp_pt);
      ++evals;
      if (fe < fr) {
        pts[iw] = exp_pt;
        fv[iw] = fe;
      } else {
        pts[iw] = refl;
        fv[iw] = fr;
      }
    } else if (fr < fv[im]) {
      pts[iw] = refl;
      fv[iw] = fr;
    } else {
      const Vec2 base = (fr < fv[iw]) ? refl : pts[iw];
      const double fbase = (fr < fv[iw]) ? fr : fv[iw];
      const Vec2 contr = box.clamp(centroid + (base - centroid) * 0.5);
      const double fc = fn(contr);
      ++evals;
      if (fc < fbase) {
        pts[iw] = contr;
        fv[iw] = fc;
      } else {
        // Shrink toward the best vertex.
        for (int i : {im, iw}) {
          pts[i] = box.clamp(pts[ib] + (pts[i] - pts[ib]) * 0.5);
          fv[i] = fn(pts[i]);
          ++evals;
        }
      }
    }
    const double diam = (pts[0] - pts[1]).norm() + (pts[1] - pts[2]).norm();
    if (diam < 1e-12) {
      converged = true;
      break;
    }
  }
  const int ib = static_cast<int>(
      std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {pts[ib], fv[ib], converged};
}

// Projected-gradient polish with Armijo backtracking. GradFn returns the
// gradient in u-coordinates.
template <class F, class GradFn>
NmOutcome polish(const F& fn, const GradFn& grad_fn, Vec2 u, double f0,
                 const BoxU& box, int max_iters = 40) {
  double f = f0;
  double step = 0.5;
  bool small_grad = false;
  for (int it = 0; it < max_iters; ++it) {
    const Vec2 g = grad_fn(u);
    // Projected gradient: kill components that push outside the box.
    Vec2 pg = g;
    if ((u.x <= box.lo1 && g.x > 0.0) || (u.x >= box.hi1 && g.x < 0.0))
      pg.x = 0.0;
    if ((u.y <= box.lo2 && g.y > 0.0) || (u.y >= box.hi2 && g.y < 0.0))
      pg.y = 0.0;
    const double gn = pg.norm();
    if (gn <= 1e-12 * (1.0 + std::fabs(f))) {
      small_grad = true;
      break;
    }
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      const Vec2 cand = box.clamp(u - pg * step);
      const Vec2 d = cand - u;
      if (d.norm() == 0.0) break;
      const double fc = fn(cand);
      if (fc <= f + 1e-4 * g.dot(d)) {
        u = cand;
        f = fc;
        accepted = true;
        step = std::min(step * 1.6, 4.0);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return {u, f, small_grad};
}

// Shared objective plumbing -------------------------------------------------

struct RiskEval {
  const WeightedDataset& data;
  double beta_reg;

  double value(const model::FragilityParams& t) const {
    const double la = std::log(t.alpha);
    const double inv_b = 1.0 / t.beta;
    double acc = 0.0;
    const std::size_t n = data.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (data.x[i] - la) * inv_b;
      const double r = static_cast<double>(data.s[i]) - normal_cdf(z);
      acc += data.w[i] * r * r;
    }
    const double dn = static_cast<double>(n);
    return acc / dn + beta_reg * inv_b / dn;
  }

  Vec2 grad(const model::FragilityParams& t) const {
    Vec2 acc{};
    const std::size_t n = data.size();
    for (std::size_t i = 0; i < n; ++i)
      acc += model::quad_loss(t, data.x[i], data.s[i]).grad * data.w[i];
    const double dn = static_cast<double>(n);
    acc = acc * (1.0 / dn);
    acc.y += -beta_reg / (t.beta * t.beta) / dn;
    return acc;
  }
};

struct MleEval {
  const WeightedDataset& data;
  static constexpr double kClamp = 1e-12;

  double value(const model::FragilityParams& t) const {
    const double la = std::log(t.alpha);
    const double inv_b = 1.0 / t.beta;
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double z = (data.x[i] - la) * inv_b;
      const double p = data.s[i] ? normal_cdf(z) : normal_sf(z);
      acc -= std::log(std::max(p, kClamp));
    }
    return acc / static_cast<double>(data.size());
  }

  Vec2 grad(const model::FragilityParams& t) const {
    Vec2 acc{};
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double f = model::fragility_prob(t, data.x[i]);
      const double fc = model::fragility_sf(t, data.x[i]);
      const Vec2 df = model::fragility_grad(t, data.x[i]);
      if (data.s[i]) {
        if (f > kClamp) acc += df * (-1.0 / f);
      } else {
        if (fc > kClamp) acc += df * (1.0 / fc);
      }
    }
    return acc * (1.0 / static_cast<double>(data.size()));
  }
};

// Gradient in u via the chain rule d/du = theta * d/dtheta.
template <class Eval>
Vec2 grad_u(const Eval& ev, const Vec2& u) {
  const model::FragilityParams t = params_from_u(u);
  const Vec2 g = ev.grad(t);
  return {t.alpha * g.x, t.beta * g.y};
}

template <class Eval>
FitResult fit_from_starts(const Eval& ev, const model::ParamBounds& bounds,
                          const std::vector<Vec2>& starts_u) {
  const BoxU box = BoxU::from(bounds);
  auto value_u = [&](const Vec2& u) { return ev.value(params_from_u(u)); };
  auto gradient_u = [&](const Vec2& u) { return grad_u(ev, u); };

  NmOutcome best;
  for (const Vec2& s : starts_u) {
    const NmOutcome r = nelder_mead(value_u, s, box);
    if (r.f < best.f) best = r;
  }
  const NmOutcome polished = polish(value_u, gradient_u, best.u, best.f, box);

  FitResult out;
  out.theta = bounds.clamp(params_from_u(box.clamp(polished.u)));
  out.risk_value = ev.value(out.theta);
  out.converged = best.converged || polished.converged;
  out.boundary = bounds.on_boundary(out.theta);
  return out;
}

std::vector<Vec2> multistart_set(const model::ParamBounds& bounds,
                                 const model::FragilityParams& init) {
  const BoxU box = BoxU::from(bounds);
  std::vector<Vec2> starts;
  starts.reserve(5);
  starts.push_back(box.clamp(u_from_params(bounds.clamp(init))));
  for (const Vec2& s : lhs_starts(box)) starts.push_back(s);
  return starts;
}

model::FragilityParams box_center(const model::ParamBounds& b) {
  return {std::sqrt(b.alpha_lo * b.alpha_hi), std::sqrt(b.beta_lo * b.beta_hi)};
}

// Single-label data leaves the optimum on an unidentifiable plateau. Prefer
// the canonical boundary representative (curve pinned fully up or fully
// down) whenever it is as good as whatever the search returned, so the
// degeneracy is visible downstream.
template <class Eval>
void prefer_degenerate_rep(const Eval& ev, const model::ParamBounds& bounds,
                           int label, FitResult& fit) {
  const model::FragilityParams canon{
      label == 1 ? bounds.alpha_lo : bounds.alpha_hi, bounds.beta_lo};
  const double v = ev.value(canon);
  if (v <= fit.risk_value + 1e-12 * (1.0 + std::fabs(fit.risk_value))) {
    fit.theta = canon;
    fit.risk_value = v;
    fit.boundary = true;
  }
}

}  // namespace

WeightedDataset IsalTrajectory::prefix(std::size_t m) const {
  if (m > draws.size())
    throw std::out_of_range("IsalTrajectory::prefix: m exceeds run length");
  WeightedDataset out;
  out.provenance = (epsilon == 1.0) ? Provenance::kRs : Provenance::kIsal;
  out.x.reserve(m);
  out.s.reserve(m);
  out.w.reserve(m);
  for (std::size_t i = 0; i < m; ++i)
    out.push(draws[i].x, labels[i], draws[i].likelihood_ratio);
  return out;
}

double regularized_risk(const WeightedDataset& data,
                        const model::FragilityParams& theta,
                        const model::RegularizerConfig& reg) {
  if (data.size() == 0)
    throw std::invalid_argument("regularized_risk: empty dataset");
  return RiskEval{data, reg.beta_reg}.value(theta);
}

Vec2 regularized_risk_grad(const WeightedDataset& data,
                           const model::FragilityParams& theta,
                           const model::RegularizerConfig& reg) {
  if (data.size() == 0)
    throw std::invalid_argument("regularized_risk_grad: empty dataset");
  return RiskEval{data, reg.beta_reg}.grad(theta);
}

FitResult minimize_regularized_risk(const WeightedDataset& data,
                                    const model::RegularizerConfig& reg,
                                    const model::ParamBounds& bounds,
                                    const model::FragilityParams& init) {
  if (data.size() == 0)
    throw std::invalid_argument("minimize_regularized_risk: empty dataset");
  const RiskEval ev{data, reg.beta_reg};
  FitResult out = fit_from_starts(ev, bounds, multistart_set(bounds, init));
  out.n = data.size();
  out.all_same_label = data.all_same_label();
  if (out.all_same_label) prefer_degenerate_rep(ev, bounds, data.s[0], out);
  return out;
}

FitResult mle_fit(const WeightedDataset& data, const model::ParamBounds& bounds,
                  const model::FragilityParams& init) {
  if (data.size() == 0) throw std::invalid_argument("mle_fit: empty dataset");
  const MleEval ev{data};
  FitResult out = fit_from_starts(ev, bounds, multistart_set(bounds, init));
  out.n = data.size();
  out.all_same_label = data.all_same_label();
  if (out.all_same_label) prefer_degenerate_rep(ev, bounds, data.s[0], out);
  return out;
}

IsalTrajectory isal_run(std::span<const double> pool_x,
                        const sampling::MarginalModel& marginal,
                        const LabelOracle& oracle,
                        const model::FragilityParams& theta0, std::size_t n,
                        std::size_t n0, double epsilon,
                        const model::RegularizerConfig& reg,
                        const model::ParamBounds& bounds, Rng& rng,
                        const RegSelector& reg_selector) {
  if (n0 < 1 || n < n0)
    throw std::invalid_argument("isal_run: need n >= n0 >= 1");
  if (!bounds.contains(theta0))
    throw std::invalid_argument("isal_run: theta0 outside bounds");
  if (pool_x.empty()) throw std::invalid_argument("isal_run: empty pool");

  IsalTrajectory traj;
  traj.warmup = n0;
  traj.epsilon = epsilon;
  traj.reg = reg;
  traj.pool_x = pool_x;
  traj.marginal = marginal;
  traj.draws.reserve(n);
  traj.labels.reserve(n);
  traj.fits.reserve(n + 1);

  FitResult f0;
  f0.theta = theta0;
  f0.converged = true;
  f0.boundary = bounds.on_boundary(theta0);
  traj.fits.push_back(f0);

  std::vector<signed char> cache(pool_x.size(), -1);
  WeightedDataset data;
  data.provenance = (epsilon == 1.0) ? Provenance::kRs : Provenance::kIsal;

  sampling::DefensiveDensity dens =
      sampling::defensive_weights(pool_x, theta0, epsilon, marginal);
  model::FragilityParams cur = theta0;

  for (std::size_t i = 1; i <= n; ++i) {
    const sampling::DrawRecord rec = sampling::draw(dens, rng);
    signed char& c = cache[rec.index];
    if (c < 0) {
      try {
        c = static_cast<signed char>(oracle(rec.index) ? 1 : 0);
      } catch (...) {
        std::throw_with_nested(std::runtime_error(
            "isal_run: oracle failed at pool index " +
            std::to_string(rec.index)));
      }
      ++traj.oracle_calls;
    }
    data.push(rec.x, c, rec.likelihood_ratio);
    traj.draws.push_back(rec);
    traj.labels.push_back(c);

    if (i == n0 && reg_selector) {
      traj.reg = reg_selector(data);
      // Warmup fit records were valued under the placeholder config;
      // restate them under the selected one.
      for (std::size_t j = 1; j < traj.fits.size(); ++j) {
        WeightedDataset pre;
        for (std::size_t t = 0; t < j; ++t)
          pre.push(data.x[t], data.s[t], data.w[t]);
        traj.fits[j].risk_value = regularized_risk(pre, theta0, traj.reg);
      }
    }

    if (i > n0 || i == n) {
      FitResult fit = minimize_regularized_risk(data, traj.reg, bounds, cur);
      cur = fit.theta;
      traj.fits.push_back(fit);
      if (i < n && epsilon != 1.0)
        dens = sampling::defensive_weights(pool_x, cur, epsilon, marginal);
    } else {
      FitResult warm;
      warm.theta = theta0;
      warm.n = i;
      warm.risk_value = regularized_risk(data, theta0, traj.reg);
      warm.converged = true;
      warm.boundary = f0.boundary;
      warm.all_same_label = data.all_same_label();
      traj.fits.push_back(warm);
    }
  }
  return traj;
}

IsalTrajectory rs_run(std::span<const double> pool_x,
                      const sampling::MarginalModel& marginal,
                      const LabelOracle& oracle, std::size_t n, std::size_t n0,
                      const model::RegularizerConfig& reg,
                      const model::ParamBounds& bounds, Rng& rng) {
  return isal_run(pool_x, marginal, oracle, box_center(bounds), n, n0, 1.0,
                  reg, bounds, rng);
}

model::RegularizerConfig loo_select_beta_reg(const WeightedDataset& init_set,
                                             std::span<const double> grid,
                                             const model::ParamBounds& bounds,
                                             bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (init_set.size() < 3)
    throw std::invalid_argument("loo_select_beta_reg: need >= 3 points");
  if (grid.empty())
    throw std::invalid_argument("loo_select_beta_reg: empty grid");

  std::vector<double> cands(grid.begin(), grid.end());
  std::sort(cands.begin(), cands.end());

  const std::size_t k = init_set.size();
  bool any_interior = false;
  double best_score = std::numeric_limits<double>::infinity();
  double best_val = cands[cands.size() / 2];
  bool found = false;

  for (double c : cands) {
    const model::RegularizerConfig rc{c};
    const FitResult full =
        minimize_regularized_risk(init_set, rc, bounds, box_center(bounds));

    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      WeightedDataset held;
      held.provenance = init_set.provenance;
      for (std::size_t j = 0; j < k; ++j) {
        if (j == i) continue;
        held.push(init_set.x[j], init_set.s[j], init_set.w[j]);
      }
      // Single-start refit from the full-set optimum; LOO is model
      // selection, not the estimator, and this keeps the grid scan cheap.
      const RiskEval ev{held, c};
      const FitResult fi =
          fit_from_starts(ev, bounds, {BoxU::from(bounds).clamp(
                                          u_from_params(full.theta))});
      if (!fi.boundary) any_interior = true;
      acc += model::quad_loss(fi.theta, init_set.x[i], init_set.s[i]).value;
    }
    const double score = acc / static_cast<double>(k);
    if (score < best_score) {
      best_score = score;
      best_val = c;
      found = true;
    }
  }

  if (!any_interior || !found) {
    if (degenerate) *degenerate = true;
    return {cands[cands.size() / 2]};
  }
  return {best_val};
}

}  // namespace fragal::estimators
