#pragma once

// The three estimation procedures (IS-AL, RS, MLE) on top of a bounded
// multistart risk minimizer, plus leave-one-out selection of the
// regularization strength.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "model.hpp"
#include "rng.hpp"
#include "sampling.hpp"

namespace fragal::estimators {

enum class Provenance { kIsal, kRs, kMle };

/// Flat training set: (x, s, w) triplets. RS/MLE data carry unit weights;
/// IS-AL data carry the frozen draw-time likelihood ratios.
struct WeightedDataset {
  std::vector<double> x;
  std::vector<int> s;
  std::vector<double> w;
  Provenance provenance = Provenance::kRs;

  std::size_t size() const { return x.size(); }
  void push(double xi, int si, double wi) {
    x.push_back(xi);
    s.push_back(si);
    w.push_back(wi);
  }
  bool all_same_label() const {
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i] != s[0]) return false;
    return !s.empty();
  }
};

struct FitResult {
  model::FragilityParams theta{};
  double risk_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  bool converged = false;
  bool boundary = false;
  bool all_same_label = false;
};

/// Full record of one IS-AL run: the draws with frozen ratios, the labels,
/// and the fit after each step (fits[i] is the estimate after i points;
/// fits[0] is the initialization). pool_x is a non-owning view; the pool
/// must outlive the trajectory.
struct IsalTrajectory {
  std::vector<sampling::DrawRecord> draws;
  std::vector<int> labels;
  std::vector<FitResult> fits;
  std::size_t warmup = 0;
  double epsilon = 1.0;
  model::RegularizerConfig reg{};
  std::span<const double> pool_x;
  sampling::MarginalModel marginal{};
  std::size_t oracle_calls = 0;

  std::size_t size() const { return draws.size(); }
  WeightedDataset prefix(std::size_t m) const;
};

/// Labeling function by pool index. Failures should throw; isal_run
/// propagates with the offending index attached.
using LabelOracle = std::function<int(std::size_t)>;

/// Optional hook invoked once when the warmup sample is complete, replacing
/// the regularization config for the rest of the run (used when beta_reg is
/// selected by LOO on the warmup draws themselves).
using RegSelector =
    std::function<model::RegularizerConfig(const WeightedDataset& warmup)>;

/// Weighted regularized empirical risk at theta:
/// (1/n) sum w_i l(x_i, s_i) + beta_reg / (n beta).
double regularized_risk(const WeightedDataset& data,
                        const model::FragilityParams& theta,
                        const model::RegularizerConfig& reg);

/// Gradient of the same objective (regularizer term included).
Vec2 regularized_risk_grad(const WeightedDataset& data,
                           const model::FragilityParams& theta,
                           const model::RegularizerConfig& reg);

/// Bounded minimization of the weighted regularized risk: multistart
/// Nelder-Mead (init + 4 fixed Latin-hypercube starts, in log coordinates)
/// followed by a projected-gradient polish with analytic gradients.
FitResult minimize_regularized_risk(const WeightedDataset& data,
                                    const model::RegularizerConfig& reg,
                                    const model::ParamBounds& bounds,
                                    const model::FragilityParams& init);

/// Maximum-likelihood fit (probit log-likelihood, f clamped to
/// [1e-12, 1-1e-12]); no regularization in the objective. risk_value holds
/// the mean negative log-likelihood at the optimum.
FitResult mle_fit(const WeightedDataset& data, const model::ParamBounds& bounds,
                  const model::FragilityParams& init);

/// Importance-sampling active learning. Draw i comes from the defensive
/// mixture at fits[i-1].theta (theta0 throughout the first n0 warmup
/// steps); the fit is refreshed after every post-warmup draw and always at
/// i = n. Labels are cached per pool index, so re-drawn points cost no new
/// oracle call.
IsalTrajectory isal_run(std::span<const double> pool_x,
                        const sampling::MarginalModel& marginal,
                        const LabelOracle& oracle,
                        const model::FragilityParams& theta0, std::size_t n,
                        std::size_t n0, double epsilon,
                        const model::RegularizerConfig& reg,
                        const model::ParamBounds& bounds, Rng& rng,
                        const RegSelector& reg_selector = {});

/// Random sampling baseline: the same loop with q = p (epsilon = 1) and
/// unit weights.
IsalTrajectory rs_run(std::span<const double> pool_x,
                      const sampling::MarginalModel& marginal,
                      const LabelOracle& oracle, std::size_t n, std::size_t n0,
                      const model::RegularizerConfig& reg,
                      const model::ParamBounds& bounds, Rng& rng);

/// Picks beta_reg from the grid by leave-one-out quadratic error on the
/// initialization sample. Ties resolve to the smallest candidate; if every
/// LOO fit is boundary-degenerate the middle grid element is returned and
/// *degenerate is set.
model::RegularizerConfig loo_select_beta_reg(const WeightedDataset& init_set,
                                             std::span<const double> grid,
                                             const model::ParamBounds& bounds,
                                             bool* degenerate = nullptr);

}  // namespace fragal::estimators
