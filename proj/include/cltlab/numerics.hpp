// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace cltlab {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Model or experiment configuration that violates an invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A requested quantity needs a capability the model does not provide.
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Adaptive quadrature exhausted its evaluation budget.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;
inline constexpr double kSqrt2 = 1.41421356237309504880168872420970;

/// Scale parameter of a centered Gaussian law N(0, variance).
class GaussianRef {
 public:
  GaussianRef() = default;
  explicit GaussianRef(double variance);

  double variance() const { return variance_; }
  double sd() const;

 private:
  double variance_ = 1.0;
};

/// Standard normal density.
double normal_pdf(double x);

/// Standard normal cdf, computed from erfc so the lower tail keeps full
/// relative precision.
double normal_cdf(double x);

/// Inverse of normal_cdf on (0, 1). Wichura's AS241 (PPND16), relative
/// accuracy about 1e-16 over the whole range.
double normal_quantile(double u);

/// E|Y|^p for Y ~ N(0,1).
double normal_abs_moment(double p);

/// J(x) = \int_{-inf}^x Phi(t) dt = x Phi(x) + phi(x).
double integral_of_phi(double x);

/// \int_lo^hi (Phi(t) - c) dt, accurate to a few ulps of the result even
/// when hi - lo is tiny compared with |lo|.
double integral_phi_minus_const(double lo, double hi, double c);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

/// Adaptive Gauss-Kronrod (7/15) integration with interval bisection.
/// Throws QuadratureError when the error estimate cannot be brought below
/// tol within max_evaluations integrand calls.
QuadratureResult quadrature(const std::function<double(double)>& f, double lo,
                            double hi, double tol,
                            int max_evaluations = 200000);

/// Convenience wrapper returning only the value.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 double tol = 1e-12);

}  // namespace cltlab
