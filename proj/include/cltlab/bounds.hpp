// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cltlab/models.hpp"

namespace cltlab {

/// A value with its Monte Carlo standard error (0 when exact).
struct Estimate {
  double value = 0.0;
  double se = 0.0;
  bool exact = true;
};

enum class ConstantsMode { shape_only, explicit_r1 };
std::string to_string(ConstantsMode mode);
ConstantsMode constants_mode_from_string(const std::string& tag);

struct BoundTerm {
  std::string name;
  double value = 0.0;  // already multiplied by its weight
  std::string formula;
  bool exact = true;
  double se = 0.0;
};

/// total = prefactor * (sum of term values)^power.
struct BoundBreakdown {
  std::string equation_tag;
  std::vector<BoundTerm> terms;
  double prefactor = 1.0;
  double power = 1.0;
  double total = 0.0;
  ConstantsMode constants_mode = ConstantsMode::shape_only;
  /// Named inputs worth recording next to the terms (a, v_n(a), V_n, ...).
  std::vector<std::pair<std::string, double>> parameters;
  /// Rate exponent in V_n the bound predicts, when it has one.
  std::optional<double> target_exponent;

  double recompute_total() const;
  std::optional<double> parameter(const std::string& name) const;
  const BoundTerm* term(const std::string& name) const;
};

void write_breakdown_csv_header(std::ostream& out);
/// One row per term, then one per parameter (exact_flag "param"), then the
/// total (exact_flag "total").
void write_breakdown_csv(std::ostream& out, const BoundBreakdown& breakdown);
void print_breakdown_table(std::ostream& out, const BoundBreakdown& breakdown);

/// Monte Carlo controls shared by the evaluators that may need sampling.
struct McOptions {
  std::int64_t replicates = 10000;
  std::uint64_t master_seed = 0;
  int threads = 1;
};

// ---------------------------------------------------------------------------
// psi_n(t) = sup_k E min(t delta_n xi_k^2, |xi_k|^3) / sigma_k^2

enum class PsiMode { closed_form, monte_carlo };

/// Whether psi_n has an exact evaluator for the model (Gaussian, Rademacher,
/// the lower-bound construction, and the martingale view of a chain).
bool psi_has_closed_form(const ModelSpec& spec);

/// Exact psi_n as a function of t. Throws CapabilityError when unavailable.
std::function<double(double)> psi_exact(const ModelSpec& spec);

/// E min(c Z^2, |Z|^3) for standard normal Z.
double gaussian_psi_kernel(double c);

/// psi_n at each t in `ts` from one shared set of sampled paths. The SE is
/// that of the maximizing index.
std::vector<Estimate> psi_monte_carlo(const ModelSpec& spec, std::span<const double> ts,
                                      const McOptions& mc);

/// Throws DomainError for t < 0 or a non-martingale model.
Estimate psi_n(double t, const ModelSpec& spec, PsiMode mode, const McOptions& mc = {});

/// sup_k E|xi_k|^p / sigma_k^2, exact where psi_n is.
Estimate moment_ratio(const ModelSpec& spec, double p, const McOptions& mc = {});

/// sum_k E|xi_k|^p, exact where psi_n is.
Estimate abs_moment_sum(const ModelSpec& spec, double p, const McOptions& mc = {});

// ---------------------------------------------------------------------------
// U_{l,n}(p) and L_n

/// U_{l,n}(p) for l = 2..n (index l-2).
struct UProfile {
  std::vector<double> value;
  std::vector<double> se;
  bool exact = true;
  bool all_zero = true;
};

/// Exact zero without sampling for conditional-variance-constant models,
/// exact enumeration for chains when `prefer_exact`, else Monte Carlo over
/// one path set shared by every l. Throws CapabilityError when the model has
/// no conditional oracle.
UProfile u_profile(const ModelSpec& spec, double p, const McOptions& mc = {},
                   bool prefer_exact = false);

/// U_{l,n}(p) for a single l in [2, n], Monte Carlo unless constant.
Estimate u_ln(std::int64_t ell, double p, const ModelSpec& spec, const McOptions& mc = {});

/// sum_l U_l / (V_n - V_{l-1} + a^2 delta_n^2)^{(p-r)/2}. The SE adds the
/// per-l SEs, which stays valid for the correlated shared-path estimates.
Estimate l_n(double p, double r, double a, const PathMoments& moments, const UProfile& u);
/// Convenience overload computing moments and U from the model.
Estimate l_n(double p, double r, double a, const ModelSpec& spec, const McOptions& mc = {});

/// v_n(a) = a^2 delta_n^2 + (1 + a^2)/a^2 V_n. Throws DomainError for a < 1.
double vn_of_a(double a, const PathMoments& moments);

// ---------------------------------------------------------------------------
// Zolotarev / Wasserstein bound for martingales

struct Theorem1Options {
  ConstantsMode mode = ConstantsMode::shape_only;
  double kappa = 6.0;
  PsiMode psi = PsiMode::closed_form;
  McOptions mc;
  bool prefer_exact_u = true;
  int grid_points = 512;
};

/// Log-grid trapezoid of f over [lo, hi] with `points` nodes; `error`
/// receives the Richardson estimate from the half grid.
double log_grid_trapezoid(const std::function<double(double)>& f, double lo, double hi,
                          int points, double* error = nullptr);

/// Terms: drift integral, psi integral, L_n, and the 4 sqrt(2) (a delta_n)^r
/// smoothing term. shape_only weighs the first three by 1; explicit_r1
/// (r = 1 only) uses the weights that the explicit r = 1 constants yield.
BoundBreakdown theorem1_rhs(double r, double p, double a, const ModelSpec& spec,
                            const Theorem1Options& options = {});

/// a in {1, 2, 4, ...} up to sqrt(V_n)/delta_n minimizing the total; the
/// chosen a is recorded as parameter "a".
BoundBreakdown theorem1_auto_a(double r, double p, const ModelSpec& spec,
                               const Theorem1Options& options = {});

BoundBreakdown corollary_w1_bound(double p, double r, double a, const ModelSpec& spec,
                                  const McOptions& mc = {});

/// Rate exponent of the Kolmogorov bound in V_n: -(p-2)/(2(p-1)).
double berry_esseen_exponent(double p);
BoundBreakdown berry_esseen_bound(double p, const ModelSpec& spec, const McOptions& mc = {});

/// (||<M>_n / V_n - 1||_{p/2}^{p/2} + V_n^{-p/2} sum E|xi_k|^p)^{1/(p+1)},
/// p in (2, 4].
BoundBreakdown heyde_brown_bound(double p, const ModelSpec& spec, const McOptions& mc = {});

// ---------------------------------------------------------------------------
// Weakly dependent sequences

/// B(n, p) from lambda_1..lambda_n (lambda_seq[i-1]) and
/// ||E(Y_i | G_0)||_p for i = 0..n (eta_seq[i]). Throws DomainError for an
/// empty coefficient list.
double bnp(std::int64_t n, double p, std::span<const double> alphas,
           std::span<const double> lambda_seq, std::span<const double> eta_seq);

/// (E|Z|^p)^{2/p} and (E|Z^2 - 1|^{p/2})^{2/p}.
double gaussian_cp(double p);
double gaussian_dp(double p);

/// E|X Y - shift|^s for centered jointly Gaussian (X, Y).
double bivariate_product_abs_moment(double var_x, double var_y, double cov, double shift,
                                    double s);

/// Dependence coefficients of a Gaussian linear base w.r.t. its past G_0.
struct LinearDependence {
  std::vector<double> lambda;   // lambda_1..lambda_n
  std::vector<double> eta_p;    // ||E(Y_i | G_0)||_p, i = 0..n
  std::vector<double> eta_2;    // ||E(Y_i | G_0)||_2, i = 0..n
};
/// Closed forms for AR(1); MA(q) uses the innovation filtration and
/// bivariate quadrature.
LinearDependence linear_dependence(const LinearBase& base, std::int64_t n, double p);

/// m_n sum_k ||E(Y_k|G_0)||_2 + B(n, p), plus the
/// (sum_k (alpha_k - alpha_{k-1})^2)^{1/2} term when `spectral_floor` is false.
BoundBreakdown linear_bound(double p, const ModelSpec& spec, bool spectral_floor = true);

/// K_n (1 + C_n log(1 + C_n V_n)).
double rho_mixing_bound(double k_n, double c_n, double v_n);
BoundBreakdown rho_mixing_breakdown(const ModelSpec& spec);

/// log(n + 1) log(2 + V_n).
double seqdyn_bound(std::int64_t n, double v_n);
BoundBreakdown seqdyn_breakdown(const ModelSpec& spec);

/// Known equation tags accepted by evaluate_bound.
const std::vector<std::string>& known_bound_tags();

struct BoundRequest {
  std::string tag;
  double p = 3.0;
  double r = 1.0;
  std::optional<double> a;  // nullopt: automatic choice
  Theorem1Options theorem1;
  bool spectral_floor = true;
};
/// Dispatch by tag. Throws ConfigError for an unknown tag.
BoundBreakdown evaluate_bound(const BoundRequest& request, const ModelSpec& spec);

}  // namespace cltlab
