// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <vector>

namespace cltlab {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw DomainError(std::string(what) + ": argument must be finite");
  }
}

// Horner evaluation, coefficients from the constant term upwards.
template <std::size_t N>
double poly(const std::array<double, N>& c, double x) {
  double acc = c[N - 1];
  for (std::size_t i = N - 1; i-- > 0;) acc = acc * x + c[i];
  return acc;
}

}  // namespace

GaussianRef::GaussianRef(double variance) : variance_(variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw DomainError("GaussianRef: variance must be positive and finite");
  }
}

double GaussianRef::sd() const { return std::sqrt(variance_); }

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) {
  require_finite(x, "normal_cdf");
  return 0.5 * std::erfc(-x / kSqrt2);
}

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("normal_quantile: u must lie in (0, 1)");
  }
  static constexpr std::array<double, 8> a = {
      3.3871328727963666080e0, 1.3314166789178437745e+2,
      1.9715909503065514427e+3, 1.3731693765509461125e+4,
      4.5921953931549871457e+4, 6.7265770927008700853e+4,
      3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr std::array<double, 8> b = {
      1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2,
      5.3941960214247511077e+3, 2.1213794301586595867e+4,
      3.9307895800092710610e+4, 2.8729085735721942674e+4,
      5.2264952788528545610e+3};
  static constexpr std::array<double, 8> c = {
      1.42343711074968357734e0, 4.63033784615654529590e0,
      5.76949722146069140550e0, 3.64784832476320460504e0,
      1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr std::array<double, 8> d = {
      1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1,
      1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9};
  static constexpr std::array<double, 8> e = {
      6.65790464350110377720e0, 5.46378491116411436990e0,
      1.78482653991729133580e0, 2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr std::array<double, 8> f = {
      1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4,
      1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15};

  const double q = u - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * poly(a, r) / poly(b, r);
  }
  double r = q < 0.0 ? u : 1.0 - u;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = poly(c, r) / poly(d, r);
  } else {
    r -= 5.0;
    val = poly(e, r) / poly(f, r);
  }
  return q < 0.0 ? -val : val;
}

double normal_abs_moment(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw DomainError("normal_abs_moment: p must be positive");
  }
  // 2^{p/2} Gamma((p+1)/2) / sqrt(pi), in log space to stay finite for large p.
  const double log_m = 0.5 * p * std::numbers::ln2 + std::lgamma(0.5 * (p + 1.0)) -
                       0.5 * std::log(std::numbers::pi);
  return std::exp(log_m);
}

double integral_of_phi(double x) {
  require_finite(x, "integral_of_phi");
  // The two terms nearly cancel for very negative x; the true value is
  // nonnegative so clamp the rounding residue.
  return std::max(0.0, x * normal_cdf(x) + normal_pdf(x));
}

double integral_phi_minus_const(double lo, double hi, double c) {
  const double h = 0.5 * (hi - lo);
  if (std::fabs(h) <= 1e-3) {
    // Symmetric Taylor expansion of Phi about the midpoint.
    const double m = lo + h;
    const double pdf = normal_pdf(m);
    const double h2 = h * h;
    const double second = -m * pdf;
    const double fourth = (3.0 * m - m * m * m) * pdf;
    const double sixth = (-m * m * m * m * m + 10.0 * m * m * m - 15.0 * m) * pdf;
    return 2.0 * h * (normal_cdf(m) - c) +
           h * h2 * (second / 3.0 + h2 * (fourth / 60.0 + h2 * sixth / 2520.0));
  }
  return integral_of_phi(hi) - integral_of_phi(lo) - c * (hi - lo);
}

namespace {

// Kronrod 15-point nodes (nonnegative half) with Kronrod and Gauss weights.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss 7-point weights for kXgk[1], kXgk[3], kXgk[5], kXgk[7].
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double lo;
  double hi;
  double value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

Segment gauss_kronrod(const std::function<double(double)>& f, double lo,
                      double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(center);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kWgk[j] * pair;
    if (j % 2 == 1) gauss += kWg[j / 2] * pair;
  }
  kronrod *= half;
  gauss *= half;
  const double err = std::fabs(kronrod - gauss);
  if (!std::isfinite(kronrod)) {
    throw QuadratureError("quadrature: integrand is not finite on the interval");
  }
  return {lo, hi, kronrod, err};
}

}  // namespace

QuadratureResult quadrature(const std::function<double(double)>& f, double lo,
                            double hi, double tol, int max_evaluations) {
  if (!(tol > 0.0)) throw DomainError("quadrature: tol must be positive");
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw DomainError("quadrature: limits must be finite");
  }
  if (lo == hi) return {};
  const double sign = hi < lo ? -1.0 : 1.0;
  if (hi < lo) std::swap(lo, hi);

  std::priority_queue<Segment> heap;
  heap.push(gauss_kronrod(f, lo, hi));
  int evaluations = 15;
  double error = heap.top().error;
  while (error > tol) {
    if (evaluations + 30 > max_evaluations) {
      throw QuadratureError("quadrature: error " + std::to_string(error) +
                            " above tolerance " + std::to_string(tol) +
                            " after " + std::to_string(evaluations) +
                            " evaluations");
    }
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      throw QuadratureError("quadrature: interval cannot be bisected further");
    }
    const Segment left = gauss_kronrod(f, worst.lo, mid);
    const Segment right = gauss_kronrod(f, mid, worst.hi);
    evaluations += 30;
    heap.push(left);
    heap.push(right);
    error += left.error + right.error - worst.error;
    if (error < 0.0) error = 0.0;
  }
  double value = 0.0;
  double err = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  if (err > tol) {
    throw QuadratureError("quadrature: error estimate above tolerance");
  }
  return {sign * value, err, evaluations};
}

double integrate(const std::function<double(double)>& f, double lo, double hi,
                 double tol) {
  return quadrature(f, lo, hi, tol).value;
}

}  // namespace cltlab
