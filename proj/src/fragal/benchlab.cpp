#include "benchlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace fragal::benchlab {

namespace {

// Stream tags for seed derivation; arbitrary but fixed.
enum StreamTag : std::uint64_t {
  kStreamPoolX = 11,
  kStreamPoolLabels = 12,
  kStreamTest = 13,
  kStreamIsal = 21,
  kStreamRs = 22,
  kStreamMle = 23,
};

model::FragilityParams center_of(const model::ParamBounds& b) {
  return {std::sqrt(b.alpha_lo * b.alpha_hi), std::sqrt(b.beta_lo * b.beta_hi)};
}

estimators::LabelOracle pool_oracle(const CaseContext& ctx) {
  return [&ctx](std::size_t idx) { return ctx.pool_labels.at(idx); };
}

// 20-point naive sample from p: uniform pool indices, unit weights.
estimators::WeightedDataset draw_naive_sample(const CaseContext& ctx,
                                              std::size_t count, Rng& rng,
                                              std::size_t* oracle_calls) {
  estimators::WeightedDataset out;
  out.provenance = estimators::Provenance::kRs;
  std::vector<signed char> seen(ctx.pool_x.size(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t idx = rng.uniform_index(ctx.pool_x.size());
    if (!seen[idx]) {
      seen[idx] = 1;
      ++*oracle_calls;
    }
    out.push(ctx.pool_x[idx], ctx.pool_labels[idx], 1.0);
  }
  return out;
}

}  // namespace

CaseContext build_synthetic_case(const SyntheticSpec& spec,
                                 std::uint64_t seed) {
  CaseContext ctx;
  ctx.bounds = spec.bounds;
  ctx.theta_star = spec.theta_star;
  ctx.marginal =
      sampling::MarginalModel::analytic_gaussian(spec.x_mean, spec.x_var);
  ctx.init_mode = IsalInitMode::kNaiveSample;
  ctx.beta_reg_grid = spec.beta_reg_grid;

  const double sd = std::sqrt(spec.x_var);
  Rng rx(derive_seed(seed, kStreamPoolX));
  ctx.pool_x.resize(spec.pool_size);
  for (auto& x : ctx.pool_x) x = rx.normal(spec.x_mean, sd);

  // Labels are assigned per pool point once: a point re-drawn later must
  // reproduce the same failure state.
  Rng rl(derive_seed(seed, kStreamPoolLabels));
  ctx.pool_labels.resize(spec.pool_size);
  for (std::size_t i = 0; i < spec.pool_size; ++i) {
    const double mu = model::fragility_prob(spec.theta_star, ctx.pool_x[i]);
    ctx.pool_labels[i] = (rl.uniform01() < mu) ? 1 : 0;
  }

  Rng rt(derive_seed(seed, kStreamTest));
  ctx.test.x.resize(spec.test_size);
  ctx.test.s.resize(spec.test_size);
  for (std::size_t i = 0; i < spec.test_size; ++i) {
    ctx.test.x[i] = rt.normal(spec.x_mean, sd);
    const double mu = model::fragility_prob(spec.theta_star, ctx.test.x[i]);
    ctx.test.s[i] = (rt.uniform01() < mu) ? 1 : 0;
  }

  ctx.b = integrate_adaptive(
      [&](double x) {
        const double f = model::fragility_prob(spec.theta_star, x);
        const double fc = model::fragility_sf(spec.theta_star, x);
        return ctx.marginal.density(x) * f * fc;
      },
      spec.x_mean - 8.0 * sd, spec.x_mean + 8.0 * sd, 1e-10);
  return ctx;
}

IsalRep run_isal_replication(const CaseContext& ctx, std::size_t n,
                             std::size_t n0, double epsilon,
                             std::uint64_t seed) {
  Rng rng(derive_seed(seed, kStreamIsal));
  IsalRep rep;
  const auto oracle = pool_oracle(ctx);

  if (ctx.init_mode == IsalInitMode::kNaiveSample) {
    // theta0 and beta_reg from a fresh naive p-sample.
    std::size_t prep_calls = 0;
    const estimators::WeightedDataset init_set =
        draw_naive_sample(ctx, ctx.naive_init_size, rng, &prep_calls);
    rep.oracle_calls_total += prep_calls;
    rep.reg = estimators::loo_select_beta_reg(init_set, ctx.beta_reg_grid,
                                              ctx.bounds, &rep.loo_degenerate);
    const estimators::FitResult f0 = estimators::minimize_regularized_risk(
        init_set, rep.reg, ctx.bounds, center_of(ctx.bounds));
    rep.traj = estimators::isal_run(ctx.pool_x, ctx.marginal, oracle, f0.theta,
                                    n, n0, epsilon, rep.reg, ctx.bounds, rng);
  } else {
    // Fixed surrogate initialization; beta_reg from LOO on the warmup draws.
    bool* deg = &rep.loo_degenerate;
    auto selector = [&ctx, deg](const estimators::WeightedDataset& warm) {
      estimators::WeightedDataset unit = warm;
      std::fill(unit.w.begin(), unit.w.end(), 1.0);
      return estimators::loo_select_beta_reg(unit, ctx.beta_reg_grid,
                                             ctx.bounds, deg);
    };
    rep.traj =
        estimators::isal_run(ctx.pool_x, ctx.marginal, oracle,
                             ctx.fixed_theta0, n, n0, epsilon,
                             model::RegularizerConfig{}, ctx.bounds, rng,
                             selector);
    rep.reg = rep.traj.reg;
  }
  rep.oracle_calls_total += rep.traj.oracle_calls;
  return rep;
}

IsalRep run_rs_replication(const CaseContext& ctx, std::size_t n,
                           std::size_t n0, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kStreamRs));
  IsalRep rep;
  const auto oracle = pool_oracle(ctx);
  // RS's first n0 points double as its initialization sample for LOO.
  bool* deg = &rep.loo_degenerate;
  const auto& bounds = ctx.bounds;
  const auto& grid = ctx.beta_reg_grid;
  auto selector = [&grid, &bounds, deg](const estimators::WeightedDataset& w) {
    return estimators::loo_select_beta_reg(w, grid, bounds, deg);
  };
  rep.traj = estimators::isal_run(ctx.pool_x, ctx.marginal, oracle,
                                  center_of(ctx.bounds), n, n0, 1.0,
                                  model::RegularizerConfig{}, ctx.bounds, rng,
                                  selector);
  rep.reg = rep.traj.reg;
  rep.oracle_calls_total = rep.traj.oracle_calls;
  return rep;
}

MleRep run_mle_replication(const CaseContext& ctx, std::size_t n,
                           std::size_t n0, std::span<const std::size_t> sizes,
                           std::uint64_t seed) {
  Rng rng(derive_seed(seed, kStreamMle));
  MleRep rep;
  std::size_t calls = 0;
  rep.data = draw_naive_sample(ctx, n, rng, &calls);
  rep.data.provenance = estimators::Provenance::kMle;
  rep.oracle_calls = calls;

  estimators::WeightedDataset init;
  init.provenance = estimators::Provenance::kMle;
  for (std::size_t i = 0; i < std::min(n0, n); ++i)
    init.push(rep.data.x[i], rep.data.s[i], 1.0);
  rep.reg = estimators::loo_select_beta_reg(init, ctx.beta_reg_grid,
                                            ctx.bounds, &rep.loo_degenerate);

  model::FragilityParams warm = center_of(ctx.bounds);
  for (std::size_t m : sizes) {
    if (m == 0 || m > n) continue;
    estimators::WeightedDataset prefix;
    prefix.provenance = estimators::Provenance::kMle;
    for (std::size_t i = 0; i < m; ++i)
      prefix.push(rep.data.x[i], rep.data.s[i], 1.0);
    estimators::FitResult fit = estimators::mle_fit(prefix, ctx.bounds, warm);
    warm = fit.theta;
    rep.sizes.push_back(m);
    rep.fits.push_back(fit);
  }
  return rep;
}

double test_risk(const model::FragilityParams& theta,
                 const model::RegularizerConfig& reg, const TestSet& test) {
  if (test.size() == 0) throw std::invalid_argument("test_risk: empty set");
  double acc = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double r = static_cast<double>(test.s[i]) -
                     model::fragility_prob(theta, test.x[i]);
    acc += r * r;
  }
  const double nt = static_cast<double>(test.size());
  return acc / nt + reg.beta_reg / (nt * theta.beta);
}

MetricRow compute_metrics(const std::vector<double>& risks, double b,
                          const std::vector<double>* isal_risks) {
  MetricRow row;
  row.reps = risks.size();
  if (risks.empty()) return row;
  row.mean = mean_of(risks);
  row.q10 = quantile_type7(risks, 0.10);
  row.q90 = quantile_type7(risks, 0.90);
  const double var = variance_of(risks);
  row.rsd = (row.mean == 0.0) ? std::numeric_limits<double>::quiet_NaN()
                              : std::sqrt(var) / row.mean;
  if (std::isfinite(b) && b != 0.0) row.rb = std::fabs(b - row.mean) / b;
  if (isal_risks && isal_risks->size() >= 2) {
    const double var_isal = variance_of(*isal_risks);
    row.nu_vs_isal = (isal_risks == &risks) ? 1.0 : var / var_isal;
  }
  return row;
}

Coverage coverage_probability(const std::vector<bool>& contains_star) {
  Coverage c;
  c.total = contains_star.size();
  for (bool b : contains_star) c.hits += b ? 1 : 0;
  if (c.total > 0) {
    c.cp = static_cast<double>(c.hits) / static_cast<double>(c.total);
    c.se = std::sqrt(c.cp * (1.0 - c.cp) / static_cast<double>(c.total));
  }
  return c;
}

double cev(const Mat2& cov, std::size_t n) {
  if (n == 0) throw std::invalid_argument("cev: n = 0");
  return (cov * (1.0 / static_cast<double>(n))).det();
}

BootstrapCov bootstrap_mle_cov(const estimators::WeightedDataset& data,
                               std::size_t n_boot,
                               const model::ParamBounds& bounds,
                               const model::FragilityParams& theta_hat,
                               Rng& rng) {
  const std::size_t n = data.size();
  if (n == 0 || n_boot == 0)
    throw std::invalid_argument("bootstrap_mle_cov: empty input");
  BootstrapCov out;
  Mat2 acc{};
  for (std::size_t b = 0; b < n_boot; ++b) {
    estimators::WeightedDataset res;
    res.provenance = estimators::Provenance::kMle;
    int first = -1;
    bool mixed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = rng.uniform_index(n);
      res.push(data.x[j], data.s[j], 1.0);
      if (first < 0)
        first = data.s[j];
      else if (data.s[j] != first)
        mixed = true;
    }
    if (!mixed) {
      ++out.dropped;
      continue;
    }
    const estimators::FitResult fit =
        estimators::mle_fit(res, bounds, theta_hat);
    const Vec2 d{fit.theta.alpha - theta_hat.alpha,
                 fit.theta.beta - theta_hat.beta};
    acc += Mat2::outer(d, d) * static_cast<double>(n);
    ++out.kept;
  }
  if (out.dropped * 2 > n_boot)
    throw TooManyDegenerateError(
        "bootstrap_mle_cov: more than half the resamples were single-label");
  out.v_mle = acc * (1.0 / static_cast<double>(out.kept));
  return out;
}

ReferenceCurve nonparametric_reference(std::span<const double> ims,
                                       std::span<const int> labels,
                                       std::size_t k, Rng& rng) {
  if (ims.size() != labels.size() || ims.empty())
    throw std::invalid_argument("nonparametric_reference: bad input");
  k = std::min(k, ims.size());
  const std::size_t n = ims.size();

  std::vector<double> best_centers;
  double best_wcss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> assign(n);

  for (int restart = 0; restart < 10; ++restart) {
    std::vector<double> centers(k);
    for (auto& c : centers) c = ims[rng.uniform_index(n)];
    std::sort(centers.begin(), centers.end());
    double wcss = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      std::vector<double> sum(k, 0.0);
      std::vector<std::size_t> cnt(k, 0);
      wcss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t bi = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          const double d = std::fabs(ims[i] - centers[c]);
          if (d < bd) {
            bd = d;
            bi = c;
          }
        }
        assign[i] = bi;
        sum[bi] += ims[i];
        cnt[bi] += 1;
        wcss += bd * bd;
      }
      bool moved = false;
      for (std::size_t c = 0; c < k; ++c) {
        if (cnt[c] == 0) continue;  // empty cluster keeps its center
        const double nc = sum[c] / static_cast<double>(cnt[c]);
        if (nc != centers[c]) moved = true;
        centers[c] = nc;
      }
      if (!moved) break;
    }
    if (wcss < best_wcss) {
      best_wcss = wcss;
      best_centers = centers;
    }
  }

  // Final assignment against the winning centers.
  std::vector<double> centers = best_centers;
  std::vector<std::size_t> order(centers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });

  ReferenceCurve out;
  std::vector<std::size_t> fail(centers.size(), 0), cnt(centers.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t bi = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = std::fabs(ims[i] - centers[c]);
      if (d < bd) {
        bd = d;
        bi = c;
      }
    }
    fail[bi] += labels[i] ? 1 : 0;
    cnt[bi] += 1;
  }
  for (std::size_t oi : order) {
    if (cnt[oi] == 0) continue;
    out.centers.push_back(centers[oi]);
    out.fraction.push_back(static_cast<double>(fail[oi]) /
                           static_cast<double>(cnt[oi]));
    out.counts.push_back(cnt[oi]);
  }
  return out;
}

FragilityBand fragility_ci_from_asymptotics(
    const model::FragilityParams& theta_hat, const Mat2& cov,
    std::span<const double> x_grid, std::size_t draws, double q_lo,
    double q_hi, const model::ParamBounds& bounds, Rng& rng) {
  if (draws == 0 || x_grid.empty())
    throw std::invalid_argument("fragility_ci: empty input");
  const Mat2 chol = cholesky_psd(cov);
  std::vector<model::FragilityParams> thetas(draws);
  for (auto& t : thetas) {
    const double n1 = rng.normal01(), n2 = rng.normal01();
    t = bounds.clamp({theta_hat.alpha + chol.a11 * n1,
                      theta_hat.beta + chol.a21 * n1 + chol.a22 * n2});
  }
  FragilityBand band;
  band.x_grid.assign(x_grid.begin(), x_grid.end());
  band.lo.resize(x_grid.size());
  band.hi.resize(x_grid.size());
  band.point.resize(x_grid.size());
  std::vector<double> vals(draws);
  for (std::size_t g = 0; g < x_grid.size(); ++g) {
    for (std::size_t d = 0; d < draws; ++d)
      vals[d] = model::fragility_prob(thetas[d], x_grid[g]);
    band.lo[g] = quantile_type7(vals, q_lo);
    band.hi[g] = quantile_type7(vals, q_hi);
    band.point[g] = model::fragility_prob(theta_hat, x_grid[g]);
  }
  return band;
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  threads = std::max(1u, std::min<unsigned>(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace fragal::benchlab
