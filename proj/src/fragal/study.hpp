#pragma once

// Config-driven studies: pool generation for the oscillator case, full
// benchmark execution (IS-AL / RS / MLE replications, metrics, inference
// series, paired-run convergence statistics), and figure-data reports.
// Everything is a pure function of (config, seed); outputs are plain
// delimiter-separated tables plus a JSON manifest and are byte-identical
// across runs and thread counts.

#include <cstdint>
#include <string>
#include <vector>

#include "benchlab.hpp"
#include "dynamics.hpp"
#include "model.hpp"

namespace fragal::study {

struct ImChoice {
  enum class Kind { kPga, kSa };
  Kind kind = Kind::kPga;
  double sa_freq_hz = 5.0;
  double sa_zeta = 0.02;
};

struct StudyConfig {
  std::string case_name = "synthetic";  // "synthetic" | "oscillator"
  ImChoice im{};

  std::size_t n = 120;
  std::size_t n0 = 20;
  std::size_t replications = 200;
  double epsilon = 1e-3;
  std::vector<double> epsilon_sweep;  // empty -> {epsilon}
  std::vector<double> beta_reg_grid{1e-4, 1e-3, 1e-2, 1e-1};
  double xi = 0.9;
  model::ParamBounds bounds{};
  std::size_t pool_size = 10000;
  std::size_t test_size = 10000;
  std::uint64_t seed = 20260801;
  std::vector<std::size_t> eval_sizes{20, 40, 60, 80, 100, 120};
  std::vector<std::size_t> inference_sizes{120};
  std::size_t wn_pairs = 10;
  std::size_t bootstrap_b = 0;  // 0 disables the MLE bootstrap
  std::vector<std::string> strategies{"isal", "rs", "mle"};

  // synthetic case
  double alpha_star = 0.3;
  double beta_star = 0.4;
  double x_mean = -2.8134107167600364;  // log(0.3 / 5)
  double x_var = 1.69;

  // oscillator case
  dynamics::OscillatorSpec oscillator{};
  std::string capacity_mode = "fixed2y";  // "fixed2y" | "quantile"
  double capacity_quantile = 0.9;
  dynamics::GroundMotionParams ground_motion{};
  std::string pool_dir;

  std::size_t kmeans_clusters = 30;
  std::size_t ci_draws = 500;

  void validate() const;  // throws std::invalid_argument with a reason
  std::string to_json_string() const;
  static StudyConfig from_json_string(const std::string& text);
  static StudyConfig load_file(const std::string& path);
  static StudyConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

/// Generates the oscillator signal pool and test set: binary accelerogram
/// files plus manifests with precomputed intensity measures and linear
/// displacements (nonlinear displacements are included for the test set,
/// which serves as the fixed validation sample).
void gen_pool(const StudyConfig& config, const std::string& out_dir,
              std::uint64_t seed, unsigned threads);

/// Runs the full study into out_dir. Fails a replication -> logged and
/// excluded; aborts when more than 10% of a strategy's replications fail.
void run_study(const StudyConfig& config, const std::string& out_dir,
               std::uint64_t seed, unsigned threads);

/// Builds the human-readable summary and per-figure data files inside
/// study_dir/report. Byte-identical when re-invoked.
void report(const std::string& study_dir);

/// Oscillator case assembly from a generated pool (exposed for tests and
/// the acceptance suite).
struct OscillatorCaseInfo {
  double capacity = 0.0;
  model::FragilityParams theta_star_ref{};
  model::FragilityParams theta0_surrogate{};
  double b = 0.0;
  double pool_failure_fraction = 0.0;
  double d_lin_q90 = 0.0;
};

benchlab::CaseContext build_oscillator_case(const StudyConfig& config,
                                            const std::string& pool_dir,
                                            unsigned threads,
                                            OscillatorCaseInfo* info);

}  // namespace fragal::study
