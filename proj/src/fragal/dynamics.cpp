#include "dynamics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "math2.hpp"

namespace fragal::dynamics {

namespace {

constexpr char kSignalMagic[8] = {'F', 'G', 'S', 'I', 'G', '0', '0', '1'};

// Largest |h(tau)| of the cubic Hermite interpolant on one step, given
// endpoint displacements and velocities. Removes the O(dt^2) peak-sampling
// error from D.
double hermite_interval_max(double z0, double z1, double v0, double v1,
                            double h) {
  double best = std::max(std::fabs(z0), std::fabs(z1));
  const double A = 6.0 * (z0 - z1) + 3.0 * h * (v0 + v1);
  const double B = -6.0 * (z0 - z1) - 2.0 * h * (2.0 * v0 + v1);
  const double C = h * v0;
  auto consider = [&](double tau) {
    if (tau <= 0.0 || tau >= 1.0) return;
    const double t2 = tau * tau, t3 = t2 * tau;
    const double val = (2.0 * t3 - 3.0 * t2 + 1.0) * z0 +
                       (t3 - 2.0 * t2 + tau) * h * v0 +
                       (-2.0 * t3 + 3.0 * t2) * z1 + (t3 - t2) * h * v1;
    best = std::max(best, std::fabs(val));
  };
  if (A != 0.0) {
    const double disc = B * B - 4.0 * A * C;
    if (disc >= 0.0) {
      // Stable form: avoids cancellation when |4AC| << B^2.
      const double q =
          -0.5 * (B + (B >= 0.0 ? 1.0 : -1.0) * std::sqrt(disc));
      consider(q / A);
      if (q != 0.0) consider(C / q);
    }
  } else if (B != 0.0) {
    consider(-C / B);
  }
  return best;
}

// One-dimensional bilinear kinematic-hardening material state.
struct Bilinear {
  double k;        // elastic stiffness
  double hard;     // kinematic hardening modulus H = a k / (1 - a)
  double f_yield;  // k * Y
  double eps_p = 0.0;

  struct Trial {
    double force;
    double tangent;
    double dgamma;  // plastic increment magnitude (0 on the elastic branch)
    double sign;
  };

  Trial evaluate(double z) const {
    const double f_trial = k * (z - eps_p);
    const double xi = f_trial - hard * eps_p;
    const double yield = std::fabs(xi) - f_yield;
    if (yield <= 0.0) return {f_trial, k, 0.0, 0.0};
    const double sgn = (xi >= 0.0) ? 1.0 : -1.0;
    const double dg = yield / (k + hard);
    return {f_trial - k * dg * sgn, k * hard / (k + hard), dg, sgn};
  }

  // Returns the dissipation increment f_yield * dgamma.
  double commit(const Trial& t) {
    eps_p += t.dgamma * t.sign;
    return f_yield * t.dgamma;
  }
};

SimOutcome newmark_run(const Accelerogram& acc, const OscillatorSpec& spec,
                       double capacity, double z0, double v0, bool linear,
                       std::vector<double>* z_trace) {
  if (acc.samples.empty())
    throw std::invalid_argument("simulate: empty accelerogram");
  const double h = acc.dt;
  if (!(h > 0.0)) throw std::invalid_argument("simulate: dt <= 0");
  if (h > 1.0 / (20.0 * spec.freq_hz))
    throw std::invalid_argument("simulate: dt too coarse for oscillator");

  const double omega = spec.omega();
  const double k = spec.stiffness();
  const double c = 2.0 * spec.zeta * omega;
  const double a_ratio = spec.hardening_ratio;
  const bool plastic_path = !linear && a_ratio < 1.0 &&
                            std::isfinite(spec.yield_disp);
  Bilinear mat{k, plastic_path ? a_ratio * k / (1.0 - a_ratio) : 0.0,
               k * spec.yield_disp};

  const double guard = 1e3 * spec.yield_disp;
  const double inv_h2 = 4.0 / (h * h);
  const double inv_h = 2.0 / h;

  SimOutcome out;
  double z = z0, v = v0;
  auto force0 = plastic_path ? mat.evaluate(z).force : k * z;
  double a_acc = -c * v - force0 - acc.samples[0];
  out.max_disp = std::fabs(z);
  if (z_trace) {
    z_trace->clear();
    z_trace->reserve(acc.samples.size());
    z_trace->push_back(z);
  }

  for (std::size_t i = 1; i < acc.samples.size(); ++i) {
    const double s1 = acc.samples[i];
    const double rhs_a = inv_h2 * (z + h * v) + a_acc;
    const double rhs_v = inv_h * z + v;
    double z1;
    Bilinear::Trial trial{};
    if (!plastic_path) {
      z1 = (rhs_a + c * rhs_v - s1) / (inv_h2 + c * inv_h + k);
    } else {
      // Newton on z1; the residual is piecewise linear so this settles in a
      // couple of iterations once the branch is identified.
      z1 = z;
      for (int it = 0; it < 12; ++it) {
        trial = mat.evaluate(z1);
        const double resid = (inv_h2 * z1 - rhs_a) + c * (inv_h * z1 - rhs_v) +
                             trial.force + s1;
        const double slope = inv_h2 + c * inv_h + trial.tangent;
        const double dz = resid / slope;
        z1 -= dz;
        if (std::fabs(dz) <= 1e-14 * std::max(spec.yield_disp, std::fabs(z1)))
          break;
      }
      trial = mat.evaluate(z1);
      if (trial.dgamma == 0.0) {
        // The step ends on the elastic branch: restate z1 through the same
        // closed form the linear path uses, so elastic histories of the two
        // paths are bitwise identical.
        const double z1e = (rhs_a + c * rhs_v - s1 + k * mat.eps_p) /
                           (inv_h2 + c * inv_h + k);
        const Bilinear::Trial te = mat.evaluate(z1e);
        if (te.dgamma == 0.0) {
          z1 = z1e;
          trial = te;
        }
      }
      const double inc = mat.commit(trial);
      if (inc < 0.0) out.dissipation_monotone = false;
      out.plastic_dissipation += inc;
    }
    const double a1 = inv_h2 * z1 - rhs_a;
    const double v1 = inv_h * z1 - rhs_v;
    out.max_disp =
        std::max(out.max_disp, hermite_interval_max(z, z1, v, v1, h));
    z = z1;
    v = v1;
    a_acc = a1;
    if (z_trace) z_trace->push_back(z);
    if (std::fabs(z) > guard)
      throw InstabilityError("simulate: response exceeded 1e3 * Y");
  }
  out.failure = (out.max_disp > capacity) ? 1 : 0;
  return out;
}

}  // namespace

Accelerogram generate_signal(const GroundMotionParams& params, Rng& rng) {
  const std::size_t n =
      static_cast<std::size_t>(std::llround(params.duration_s / params.dt)) +
      1;
  const double h = params.dt;
  const double omega = 2.0 * M_PI * params.filter_freq_hz;
  const double zeta = params.filter_damping;
  const double wd = omega * std::sqrt(1.0 - zeta * zeta);

  // Exact zero-order-hold discretization of x'' + 2 z w x' + w^2 x = w_k.
  const double e = std::exp(-zeta * omega * h);
  const double cwd = std::cos(wd * h), swd = std::sin(wd * h);
  const double x1 = e * (cwd + zeta * omega / wd * swd);  // x(h) | x0=1,v0=0
  const double x2 = e * swd / wd;                         // x(h) | x0=0,v0=1
  const double x1d = -omega * omega / wd * e * swd;
  const double x2d = e * (cwd - zeta * omega / wd * swd);
  const double b1 = (1.0 - x2d - 2.0 * zeta * omega * x2) / (omega * omega);
  const double b2 = x2;

  // Stationary state covariance: P = Phi P Phi^T + B B^T, 3 unknowns.
  double m[3][4] = {
      {x1 * x1 - 1.0, 2.0 * x1 * x2, x2 * x2, -b1 * b1},
      {x1 * x1d, x1 * x2d + x2 * x1d - 1.0, x2 * x2d, -b1 * b2},
      {x1d * x1d, 2.0 * x1d * x2d, x2d * x2d - 1.0, -b2 * b2}};
  for (int col = 0; col < 3; ++col) {  // small Gaussian elimination
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
    std::swap(m[piv], m[col]);
    for (int r = 0; r < 3; ++r) {
      if (r == col || m[col][col] == 0.0) continue;
      const double f = m[r][col] / m[col][col];
      for (int cc = col; cc < 4; ++cc) m[r][cc] -= f * m[col][cc];
    }
  }
  const double p11 = m[0][3] / m[0][0];
  const double p12 = m[1][3] / m[1][1];
  const double p22 = m[2][3] / m[2][2];

  // Output y = w^2 x + 2 z w x' (band-passed acceleration); normalize to
  // unit stationary variance.
  const double c1 = omega * omega, c2 = 2.0 * zeta * omega;
  const double var_y =
      c1 * c1 * p11 + 2.0 * c1 * c2 * p12 + c2 * c2 * p22;
  const double norm = 1.0 / std::sqrt(var_y);

  // Record-to-record intensity factor (drawn first), then the stationary
  // initial state of the filter.
  const double amp =
      params.scale * ((params.amp_log_sd > 0.0)
                          ? std::exp(params.amp_log_sd * rng.normal01())
                          : 1.0);
  const Mat2 chol = cholesky_psd({p11, p12, p12, p22});
  const double n1 = rng.normal01(), n2 = rng.normal01();
  double sx = chol.a11 * n1;
  double sv = chol.a21 * n1 + chol.a22 * n2;

  Accelerogram acc;
  acc.dt = h;
  acc.samples.resize(n);
  const double shape = params.env_shape;
  const double tp = params.env_peak_s;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * h;
    const double env =
        (t <= 0.0) ? 0.0
                   : std::pow(t / tp, shape - 1.0) *
                         std::exp((shape - 1.0) * (1.0 - t / tp));
    const double y = (c1 * sx + c2 * sv) * norm;
    acc.samples[i] = amp * env * y;
    const double w = rng.normal01();
    const double nx = x1 * sx + x2 * sv + b1 * w;
    const double nv = x1d * sx + x2d * sv + b2 * w;
    sx = nx;
    sv = nv;
  }
  return acc;
}

double pga(const Accelerogram& acc) {
  if (acc.samples.empty()) throw std::invalid_argument("pga: empty record");
  double best = 0.0;
  for (double s : acc.samples) best = std::max(best, std::fabs(s));
  return best;
}

double spectral_accel(const Accelerogram& acc, double freq_hz, double zeta) {
  if (!(freq_hz > 0.0) || !(zeta > 0.0 && zeta < 1.0))
    throw std::invalid_argument("spectral_accel: invalid (f, zeta)");
  OscillatorSpec probe;
  probe.freq_hz = freq_hz;
  probe.zeta = zeta;
  probe.yield_disp = std::numeric_limits<double>::infinity();
  const SimOutcome r = newmark_run(acc, probe,
                                   std::numeric_limits<double>::infinity(),
                                   0.0, 0.0, /*linear=*/true, nullptr);
  return probe.stiffness() * r.max_disp;
}

SimOutcome simulate_nonlinear(const Accelerogram& acc,
                              const OscillatorSpec& spec, double capacity,
                              double z0, double v0,
                              std::vector<double>* z_trace) {
  return newmark_run(acc, spec, capacity, z0, v0, /*linear=*/false, z_trace);
}

SimOutcome simulate_linear(const Accelerogram& acc, const OscillatorSpec& spec,
                           double capacity, double z0, double v0,
                           std::vector<double>* z_trace) {
  return newmark_run(acc, spec, capacity, z0, v0, /*linear=*/true, z_trace);
}

double capacity_from_quantile(const std::vector<double>& linear_disps,
                              double q) {
  return quantile_type7(linear_disps, q);
}

void write_accelerogram(const std::string& path, const Accelerogram& acc) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(acc.samples.size());
  bool ok = std::fwrite(kSignalMagic, 1, 8, f) == 8 &&
            std::fwrite(&n, sizeof n, 1, f) == 1 &&
            std::fwrite(&acc.dt, sizeof acc.dt, 1, f) == 1;
  std::vector<float> buf(acc.samples.begin(), acc.samples.end());
  ok = ok && std::fwrite(buf.data(), sizeof(float), buf.size(), f) == buf.size();
  std::fclose(f);
  if (!ok) throw std::runtime_error("short write: " + path);
}

Accelerogram read_accelerogram(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  char magic[8];
  std::uint32_t n = 0;
  Accelerogram acc;
  bool ok = std::fread(magic, 1, 8, f) == 8 &&
            std::memcmp(magic, kSignalMagic, 8) == 0 &&
            std::fread(&n, sizeof n, 1, f) == 1 &&
            std::fread(&acc.dt, sizeof acc.dt, 1, f) == 1;
  std::vector<float> buf(ok ? n : 0);
  ok = ok && std::fread(buf.data(), sizeof(float), n, f) == n;
  std::fclose(f);
  if (!ok) throw std::runtime_error("bad accelerogram file: " + path);
  acc.samples.assign(buf.begin(), buf.end());
  return acc;
}

}  // namespace fragal::dynamics
