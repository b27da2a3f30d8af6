#pragma once

// Physics layer: synthetic ground motions (stationary band-pass filtered
// white noise under a gamma-shaped envelope), linear and bilinear
// kinematic-hardening SDOF response by Newmark average acceleration with an
// elastic-predictor / plastic-corrector return map, intensity measures, and
// the capacity rule.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace fragal::dynamics {

struct InstabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Accelerogram {
  std::vector<double> samples;  // ground acceleration, m/s^2
  double dt = 0.0;              // s

  double duration() const {
    return samples.empty() ? 0.0
                           : dt * static_cast<double>(samples.size() - 1);
  }
};

/// Unit-mass oscillator. yield_disp is the yield displacement Y;
/// hardening_ratio a is the post-yield over elastic stiffness ratio.
struct OscillatorSpec {
  double freq_hz = 5.0;
  double zeta = 0.02;
  double yield_disp = 5e-3;
  double hardening_ratio = 0.2;

  double omega() const { return 2.0 * M_PI * freq_hz; }
  double stiffness() const { return omega() * omega(); }
};

struct SimOutcome {
  double max_disp = 0.0;  // D = max_t |z(t)|, continuous (Hermite) maximum
  int failure = 0;        // 1 iff D > capacity
  double plastic_dissipation = 0.0;
  bool dissipation_monotone = true;
};

/// Stationary-filter ground-motion model. The band-pass filter is a damped
/// SDOF at filter_freq_hz / filter_damping driven by white noise, exactly
/// discretized, normalized to unit stationary variance, then shaped by a
/// gamma envelope peaking at env_peak_s with value 1 (so the sample variance
/// at the peak is scale^2).
struct GroundMotionParams {
  double filter_freq_hz = 5.0;
  double filter_damping = 0.6;
  double env_shape = 3.0;
  double env_peak_s = 4.0;
  double duration_s = 20.0;
  double dt = 0.005;
  double scale = 1.0;       // m/s^2 RMS at the envelope peak (median record)
  double amp_log_sd = 0.0;  // lognormal record-to-record intensity spread
};

Accelerogram generate_signal(const GroundMotionParams& params, Rng& rng);

/// Peak ground acceleration, max_t |s(t)|.
double pga(const Accelerogram& acc);

/// Pseudo-spectral acceleration omega^2 max|z| of the linear SDOF at
/// (freq_hz, zeta) driven by the record.
double spectral_accel(const Accelerogram& acc, double freq_hz, double zeta);

/// Bilinear kinematic-hardening response. capacity sets the failure flag
/// (D > capacity); pass +inf when only D is wanted. Initial conditions are
/// for validation against closed forms; z_trace, when given, receives the
/// nodal displacement history. Throws InstabilityError when |z| exceeds
/// 1e3 * Y.
SimOutcome simulate_nonlinear(const Accelerogram& acc,
                              const OscillatorSpec& spec,
                              double capacity =
                                  std::numeric_limits<double>::infinity(),
                              double z0 = 0.0, double v0 = 0.0,
                              std::vector<double>* z_trace = nullptr);

/// Same oscillator restricted to its elastic branch.
SimOutcome simulate_linear(const Accelerogram& acc, const OscillatorSpec& spec,
                           double capacity =
                               std::numeric_limits<double>::infinity(),
                           double z0 = 0.0, double v0 = 0.0,
                           std::vector<double>* z_trace = nullptr);

/// Empirical q-quantile (type 7) of pool linear displacements.
double capacity_from_quantile(const std::vector<double>& linear_disps,
                              double q);

// Binary accelerogram files: 8-byte magic, u32 sample count, f64 dt,
// f32 samples (native endianness).
void write_accelerogram(const std::string& path, const Accelerogram& acc);
Accelerogram read_accelerogram(const std::string& path);

}  // namespace fragal::dynamics
