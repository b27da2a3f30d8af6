#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "fragal/dynamics.hpp"
#include "fragal/rng.hpp"

using namespace fragal;
using dynamics::Accelerogram;
using dynamics::GroundMotionParams;
using dynamics::OscillatorSpec;
using dynamics::SimOutcome;

namespace {

Accelerogram zero_signal(double duration, double dt) {
  Accelerogram a;
  a.dt = dt;
  a.samples.assign(static_cast<std::size_t>(duration / dt) + 1, 0.0);
  return a;
}

Accelerogram scaled(const Accelerogram& a, double c) {
  Accelerogram out = a;
  for (auto& s : out.samples) s *= c;
  return out;
}

const OscillatorSpec kPaperOsc{5.0, 0.02, 5e-3, 0.2};

}  // namespace

TEST_CASE("pga basics") {
  Accelerogram a;
  a.dt = 0.01;
  a.samples = {1.0, -3.0, 2.0};
  CHECK(dynamics::pga(a) == 3.0);
  CHECK(dynamics::pga(zero_signal(1.0, 0.01)) == 0.0);
  CHECK(dynamics::pga(scaled(a, -2.5)) == doctest::Approx(7.5));
  CHECK_THROWS_AS((void)dynamics::pga(Accelerogram{}), std::invalid_argument);
}

TEST_CASE("spectral acceleration: zero, resonance, linearity") {
  CHECK(dynamics::spectral_accel(zero_signal(5.0, 0.002), 5.0, 0.02) == 0.0);

  // Resonant sinusoid: steady-state PSA = 1/(2 zeta) = 25 at 5 Hz, 2%.
  Accelerogram sin_acc;
  sin_acc.dt = 0.002;
  const double f = 5.0;
  const std::size_t n = static_cast<std::size_t>(60.0 / sin_acc.dt) + 1;
  sin_acc.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    sin_acc.samples[i] =
        std::sin(2.0 * M_PI * f * static_cast<double>(i) * sin_acc.dt);
  const double psa = dynamics::spectral_accel(sin_acc, f, 0.02);
  CHECK(psa == doctest::Approx(25.0).epsilon(0.05));

  const double psa3 = dynamics::spectral_accel(scaled(sin_acc, -3.0), f, 0.02);
  CHECK(psa3 == doctest::Approx(3.0 * psa).epsilon(1e-9));

  CHECK_THROWS_AS((void)dynamics::spectral_accel(sin_acc, -1.0, 0.02),
                  std::invalid_argument);
}

TEST_CASE("nonlinear oscillator: zero input stays at rest") {
  const SimOutcome r =
      dynamics::simulate_nonlinear(zero_signal(2.0, 0.005), kPaperOsc, 0.01);
  CHECK(r.max_disp == 0.0);
  CHECK(r.failure == 0);
  CHECK(r.plastic_dissipation == 0.0);
}

TEST_CASE("bilinear law: quasi-static pull to the k Y (1+a) force level") {
  // Applying exactly F = k Y (1 + a) ~ 986.96 * 0.005 * 1.2 = 5.9218 per
  // unit mass must settle on z = 2Y on the hardening branch.
  OscillatorSpec osc = kPaperOsc;
  osc.zeta = 0.7;  // heavily damped so the ramp settles quasi-statically
  const double k = osc.stiffness();
  const double target_force = k * osc.yield_disp * (1.0 + osc.hardening_ratio);
  CHECK(target_force == doctest::Approx(5.9218).epsilon(1e-3));

  Accelerogram ramp;
  ramp.dt = 0.002;
  const double t_ramp = 30.0, t_hold = 10.0;
  const std::size_t n =
      static_cast<std::size_t>((t_ramp + t_hold) / ramp.dt) + 1;
  ramp.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * ramp.dt;
    ramp.samples[i] = -target_force * std::min(1.0, t / t_ramp);
  }
  std::vector<double> trace;
  const SimOutcome r = dynamics::simulate_nonlinear(
      ramp, osc, std::numeric_limits<double>::infinity(), 0.0, 0.0, &trace);
  CHECK(trace.back() == doctest::Approx(2.0 * osc.yield_disp).epsilon(1e-3));
  CHECK(r.plastic_dissipation > 0.0);
  CHECK(r.dissipation_monotone);
}

TEST_CASE("small-amplitude free vibration matches the damped closed form") {
  OscillatorSpec osc = kPaperOsc;
  const double omega = osc.omega();
  const double zeta = osc.zeta;
  const double omega_d = omega * std::sqrt(1.0 - zeta * zeta);
  const double z0 = osc.yield_disp / 10.0;
  const double dt = 5e-5;
  const double cycles = 10.0;
  const double duration = cycles / osc.freq_hz;

  std::vector<double> trace;
  const SimOutcome r = dynamics::simulate_nonlinear(
      zero_signal(duration, dt), osc,
      std::numeric_limits<double>::infinity(), z0, 0.0, &trace);
  CHECK(r.plastic_dissipation == 0.0);

  double max_err = 0.0, max_exact = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double t = static_cast<double>(i) * dt;
    const double exact =
        std::exp(-zeta * omega * t) *
        (z0 * std::cos(omega_d * t) +
         (zeta * omega * z0 / omega_d) * std::sin(omega_d * t));
    max_err = std::max(max_err, std::fabs(trace[i] - exact));
    max_exact = std::max(max_exact, std::fabs(exact));
  }
  CHECK(max_err / max_exact < 1e-4);
}

TEST_CASE("elastic runs: nonlinear equals linear, scaling homogeneity") {
  GroundMotionParams gm;
  gm.scale = 1.0;
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Accelerogram acc = dynamics::generate_signal(gm, rng);
    const double d_lin = dynamics::simulate_linear(acc, kPaperOsc).max_disp;
    // Scale below yield: the nonlinear path must agree to 1e-8.
    const double c = 0.9 * kPaperOsc.yield_disp / d_lin;
    const Accelerogram small = scaled(acc, c);
    const SimOutcome rl = dynamics::simulate_linear(small, kPaperOsc);
    const SimOutcome rn = dynamics::simulate_nonlinear(small, kPaperOsc);
    CHECK(rn.plastic_dissipation == 0.0);
    CHECK(std::fabs(rn.max_disp - rl.max_disp) <= 1e-8 * rl.max_disp);

    // Exact homogeneity for power-of-two scaling of the linear model.
    const SimOutcome twice = dynamics::simulate_linear(scaled(small, 2.0),
                                                       kPaperOsc);
    CHECK(twice.max_disp == 2.0 * rl.max_disp);
    // Near-exact for general factors.
    const SimOutcome thrice = dynamics::simulate_linear(scaled(small, 3.0),
                                                        kPaperOsc);
    CHECK(thrice.max_disp == doctest::Approx(3.0 * rl.max_disp).epsilon(1e-11));
  }
}

TEST_CASE("plastic dissipation is nonnegative and cumulative over random signals") {
  GroundMotionParams gm;
  gm.scale = 2.0;  // strong enough to yield often
  Rng rng(6);
  int yielded = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Accelerogram acc = dynamics::generate_signal(gm, rng);
    const SimOutcome r = dynamics::simulate_nonlinear(acc, kPaperOsc);
    CHECK(r.dissipation_monotone);
    CHECK(r.plastic_dissipation >= 0.0);
    yielded += (r.plastic_dissipation > 0.0) ? 1 : 0;
  }
  CHECK(yielded > 100);  // the scale choice actually exercises plasticity
}

TEST_CASE("halving dt changes D by less than 0.1%") {
  // Convergence is judged at a resolved step (16x finer than the production
  // default): first-order yield-event error is then well inside the band
  // and the halving test shows clean second-order decay.
  GroundMotionParams gm;
  gm.scale = 1.2;
  gm.dt = 0.005 / 16.0;
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Accelerogram acc = dynamics::generate_signal(gm, rng);
    // Same physical forcing, refined grid by linear interpolation.
    Accelerogram fine;
    fine.dt = acc.dt / 2.0;
    fine.samples.resize(acc.samples.size() * 2 - 1);
    for (std::size_t i = 0; i + 1 < acc.samples.size(); ++i) {
      fine.samples[2 * i] = acc.samples[i];
      fine.samples[2 * i + 1] = 0.5 * (acc.samples[i] + acc.samples[i + 1]);
    }
    fine.samples.back() = acc.samples.back();

    const double d_coarse = dynamics::simulate_nonlinear(acc, kPaperOsc).max_disp;
    const double d_fine = dynamics::simulate_nonlinear(fine, kPaperOsc).max_disp;
    CHECK(std::fabs(d_fine - d_coarse) / d_coarse < 1e-3);
  }
}

TEST_CASE("instability guard trips on absurd input") {
  GroundMotionParams gm;
  gm.scale = 4000.0;
  Rng rng(8);
  const Accelerogram acc = dynamics::generate_signal(gm, rng);
  CHECK_THROWS_AS((void)dynamics::simulate_nonlinear(acc, kPaperOsc),
                  dynamics::InstabilityError);
}

TEST_CASE("coarse dt is rejected") {
  const Accelerogram a = zero_signal(1.0, 0.02);  // > 1/(20*5 Hz)
  CHECK_THROWS_AS((void)dynamics::simulate_linear(a, kPaperOsc),
                  std::invalid_argument);
}

TEST_CASE("ground motion generator: determinism, zero scale, peak variance") {
  GroundMotionParams gm;
  gm.scale = 1.7;
  {
    Rng r1(99), r2(99);
    const Accelerogram a = dynamics::generate_signal(gm, r1);
    const Accelerogram b = dynamics::generate_signal(gm, r2);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i)
      CHECK(a.samples[i] == b.samples[i]);
    CHECK(a.duration() == doctest::Approx(20.0));
  }
  {
    GroundMotionParams flat = gm;
    flat.scale = 0.0;
    Rng r(100);
    const Accelerogram a = dynamics::generate_signal(flat, r);
    for (double s : a.samples) CHECK(s == 0.0);
  }
  {
    // Sample variance at the envelope peak approximates scale^2; log-PGA
    // has finite moments.
    Rng r(101);
    const std::size_t peak_idx = static_cast<std::size_t>(
        std::llround(gm.env_peak_s / gm.dt));
    double acc2 = 0.0, log_pga_sum = 0.0, log_pga_sq = 0.0;
    const int reps = 1000;
    for (int i = 0; i < reps; ++i) {
      const Accelerogram a = dynamics::generate_signal(gm, r);
      acc2 += a.samples[peak_idx] * a.samples[peak_idx];
      const double lp = std::log(dynamics::pga(a));
      log_pga_sum += lp;
      log_pga_sq += lp * lp;
    }
    const double var = acc2 / reps;
    CHECK(var == doctest::Approx(gm.scale * gm.scale).epsilon(0.10));
    const double m = log_pga_sum / reps;
    CHECK(std::isfinite(m));
    CHECK(std::isfinite(log_pga_sq / reps - m * m));
  }
}

TEST_CASE("capacity from quantile") {
  CHECK(dynamics::capacity_from_quantile({0.42, 0.42, 0.42}, 0.9) == 0.42);
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(dynamics::capacity_from_quantile(v, 0.9) == doctest::Approx(90.1));
  // Paper override mode: C = 2Y = 0.01 m for the reference oscillator.
  CHECK(2.0 * kPaperOsc.yield_disp == doctest::Approx(0.01));
}

TEST_CASE("accelerogram file round trip (float32 storage)") {
  GroundMotionParams gm;
  gm.scale = 1.0;
  Rng rng(123);
  const Accelerogram a = dynamics::generate_signal(gm, rng);
  const std::string path = "/tmp/fragal_test_signal.sig";
  dynamics::write_accelerogram(path, a);
  const Accelerogram b = dynamics::read_accelerogram(path);
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(b.dt == a.dt);
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    CHECK(b.samples[i] == static_cast<double>(static_cast<float>(a.samples[i])));
  std::filesystem::remove(path);
  CHECK_THROWS_AS((void)dynamics::read_accelerogram("/nonexistent/x.sig"),
                  std::runtime_error);
}
