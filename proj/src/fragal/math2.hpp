#pragma once

// Small fixed-size linear algebra (m = 2 throughout), Gaussian special
// functions and 1-D adaptive quadrature. Everything here is pure and
// header-only; the heavier modules build on it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fragal {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double c) const { return {x * c, y * c}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

// Row-major 2x2 matrix. Most matrices in this project are symmetric; the
// type does not enforce it, callers assert where it matters.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Mat2 zero() { return {}; }
  static Mat2 outer(const Vec2& u, const Vec2& v) {
    return {u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y};
  }
  static Mat2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

  Mat2 operator+(const Mat2& o) const {
    return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
  }
  Mat2 operator-(const Mat2& o) const {
    return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22};
  }
  Mat2 operator*(double c) const { return {a11 * c, a12 * c, a21 * c, a22 * c}; }
  Mat2& operator+=(const Mat2& o) {
    a11 += o.a11; a12 += o.a12; a21 += o.a21; a22 += o.a22;
    return *this;
  }
  Mat2 operator*(const Mat2& o) const {
    return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
            a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
  }
  Vec2 operator*(const Vec2& v) const {
    return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
  }
  Mat2 transpose() const { return {a11, a21, a12, a22}; }
  double det() const { return a11 * a22 - a12 * a21; }
  double trace() const { return a11 + a22; }

  double frobenius() const {
    return std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22);
  }

  // Inverse via the explicit adjugate. Throws on exactly-singular input;
  // near-singularity is the caller's business (see cond2_sym).
  Mat2 inverse() const {
    const double d = det();
    if (d == 0.0 || !std::isfinite(d))
      throw std::domain_error("Mat2::inverse: singular matrix");
    const double r = 1.0 / d;
    return {a22 * r, -a12 * r, -a21 * r, a11 * r};
  }

  bool is_symmetric(double tol = 1e-12) const {
    const double scale = std::max({std::fabs(a11), std::fabs(a12),
                                   std::fabs(a21), std::fabs(a22), 1.0});
    return std::fabs(a12 - a21) <= tol * scale;
  }
};

// Eigenvalues of a symmetric 2x2 (ascending).
inline std::array<double, 2> eigvals_sym(const Mat2& m) {
  const double mean = 0.5 * (m.a11 + m.a22);
  const double d = 0.5 * (m.a11 - m.a22);
  const double rad = std::sqrt(d * d + m.a12 * m.a21);
  return {mean - rad, mean + rad};
}

// 2-norm condition number of a symmetric matrix, |lambda|_max / |lambda|_min.
inline double cond2_sym(const Mat2& m) {
  const auto ev = eigvals_sym(m);
  const double lo = std::min(std::fabs(ev[0]), std::fabs(ev[1]));
  const double hi = std::max(std::fabs(ev[0]), std::fabs(ev[1]));
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

// Lower Cholesky factor of a symmetric PSD matrix; tiny negative curvature
// from roundoff is clamped to zero.
inline Mat2 cholesky_psd(const Mat2& m) {
  const double l11 = std::sqrt(std::max(m.a11, 0.0));
  const double l21 = (l11 > 0.0) ? m.a21 / l11 : 0.0;
  const double l22 = std::sqrt(std::max(m.a22 - l21 * l21, 0.0));
  return {l11, 0.0, l21, l22};
}

// ---------------------------------------------------------------------------
// Gaussian special functions
// ---------------------------------------------------------------------------

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Standard normal CDF, evaluated through erfc so both tails keep full
/// relative accuracy down to the underflow threshold (|x| ~ 38).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

/// Upper tail 1 - Phi(x), without cancellation.
inline double normal_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

inline double normal_pdf(double x) {
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

/// Inverse standard normal CDF. Acklam's rational approximation polished by
/// one Halley step against the erfc-based CDF; absolute error below 1e-15
/// over (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p outside (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, x;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement against the high-precision CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

// ---------------------------------------------------------------------------
// Chi-square with 2 degrees of freedom (closed form)
// ---------------------------------------------------------------------------

inline double chi2_cdf_2(double x) {
  if (x <= 0.0) return 0.0;
  return -std::expm1(-0.5 * x);
}

/// prob-quantile of chi^2(dof). Only dof = 2 is needed by the lognormal
/// model; the closed form -2 ln(1-p) is exact.
inline double chi2_quantile(int dof, double prob) {
  if (dof != 2) throw std::domain_error("chi2_quantile: only dof = 2 supported");
  if (!(prob >= 0.0 && prob < 1.0))
    throw std::domain_error("chi2_quantile: prob outside [0,1)");
  if (prob == 0.0) return 0.0;
  return -2.0 * std::log1p(-prob);
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature (15-point Kronrod / 7-point Gauss)
// ---------------------------------------------------------------------------

namespace detail {
// Nodes/weights for [-1,1]; positive half, symmetric completion in code.
inline constexpr double kGK15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.000000000000000};
inline constexpr double kGK15WeightsK[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr double kG7Weights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

struct GKResult {
  double integral;
  double error;
};

template <class F>
GKResult gk15(const F& f, double a, double b) {
  const double h = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double resk = 0.0, resg = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double dx = h * kGK15Nodes[i];
    const double f1 = f(mid - dx);
    const double f2 = (i == 7) ? 0.0 : f(mid + dx);
    const double fsum = (i == 7) ? f1 : f1 + f2;
    resk += kGK15WeightsK[i] * fsum;
    if (i % 2 == 1) resg += kG7Weights[i / 2] * fsum;
  }
  resk *= h;
  resg *= h;
  return {resk, std::fabs(resk - resg)};
}
}  // namespace detail

/// Adaptive quadrature of f over [a,b] by recursive bisection of the GK15
/// rule; stops when the summed error estimate meets rel_tol (or abs_tol for
/// integrals near zero).
template <class F>
double integrate_adaptive(const F& f, double a, double b,
                          double rel_tol = 1e-8, double abs_tol = 1e-300,
                          int max_depth = 48) {
  struct Seg {
    double a, b, integral, error;
    int depth;
  };
  auto first = detail::gk15(f, a, b);
  std::vector<Seg> stack{{a, b, first.integral, first.error, 0}};
  double total = 0.0, total_err = 0.0;
  // Rough global budget based on the first pass, refined as segments settle.
  while (!stack.empty()) {
    Seg s = stack.back();
    stack.pop_back();
    const double budget =
        std::max(abs_tol, rel_tol * (std::fabs(total) + std::fabs(s.integral)));
    if (s.error <= budget * 0.5 || s.depth >= max_depth) {
      total += s.integral;
      total_err += s.error;
      continue;
    }
    const double m = 0.5 * (s.a + s.b);
    auto left = detail::gk15(f, s.a, m);
    auto right = detail::gk15(f, m, s.b);
    stack.push_back({s.a, m, left.integral, left.error, s.depth + 1});
    stack.push_back({m, s.b, right.integral, right.error, s.depth + 1});
  }
  (void)total_err;
  return total;
}

// ---------------------------------------------------------------------------
// Order statistics
// ---------------------------------------------------------------------------

/// Type-7 (linear interpolation) quantile of unsorted data. Matches the
/// default of most statistical environments.
inline double quantile_type7(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile_type7: empty sample");
  std::sort(v.begin(), v.end());
  if (p <= 0.0) return v.front();
  if (p >= 1.0) return v.back();
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Unbiased sample variance (n-1 denominator).
inline double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace fragal
