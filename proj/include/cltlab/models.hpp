// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cltlab/chain.hpp"
#include "cltlab/random.hpp"

namespace cltlab {

enum class Family {
  gaussian_iid,
  rademacher_iid,
  ce_lowerbound,
  linear_statistic,
  rho_mixing_chain,
  sequential_maps,
};

std::string to_string(Family family);
/// Throws ConfigError for an unknown tag.
Family family_from_string(const std::string& tag);

/// Deterministic coefficient sequence c_1..c_n, used for the scales sigma_k
/// of the iid families and for the weights alpha_{k,n} of linear statistics.
struct CoefficientRule {
  enum class Kind { constant, power, ramp, list };
  Kind kind = Kind::constant;
  double kappa = 1.0;  // constant: kappa; power: kappa k^alpha; ramp: kappa (1 + k/n)
  double alpha = 0.0;
  std::vector<double> values;  // list

  double at(std::int64_t k, std::int64_t n) const;
  std::vector<double> materialize(std::int64_t n) const;
};

/// Stationary Gaussian base sequence for linear statistics, driven by unit
/// variance innovations.
struct LinearBase {
  enum class Kind { ar1, ma };
  Kind kind = Kind::ar1;
  double phi = 0.0;                // ar1: Y_i = phi Y_{i-1} + e_i
  std::vector<double> ma_coeffs;   // ma: Y_i = sum_j theta_j e_{i-j}

  /// gamma_k = Cov(Y_0, Y_k).
  double autocovariance(std::int64_t k) const;
  /// sum_{k in Z} gamma_k.
  double long_run_variance() const;
};

enum class ChainView { values, martingale };

struct ChainParams {
  Matrix transition = {{0.75, 0.25}, {0.25, 0.75}};
  std::vector<double> f = {1.0, -1.0};
  std::optional<std::vector<double>> initial;
  ChainView view = ChainView::values;

  FiniteChain build() const;
};

enum class Observable { cos1, cos12 };
std::string to_string(Observable obs);
Observable observable_from_string(const std::string& tag);

struct SequentialParams {
  std::vector<int> schedule = {2, 3};  // m_k, repeated cyclically
  Observable observable = Observable::cos1;

  int m_at(std::int64_t k) const {
    const auto len = static_cast<std::int64_t>(schedule.size());
    return schedule[static_cast<std::size_t>((k - 1) % len)];
  }
};

struct ModelSpec {
  Family family = Family::gaussian_iid;
  std::int64_t n = 1;
  double p = 3.0;
  CoefficientRule coefficients;  // sigma_k (iid families) or alpha_{k,n}
  LinearBase base;
  ChainParams chain;
  SequentialParams sequential;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;
  /// Same spec with a different path length.
  ModelSpec with_n(std::int64_t new_n) const;
  /// Whether increments form a martingale difference sequence.
  bool is_martingale() const;
};

struct PathMoments {
  std::vector<double> sigma2;  // E xi_k^2 (marginal variances for dependent families)
  double v_n = 0.0;            // Var(S_n)
  double delta_n = 0.0;        // max_k sigma_k
  bool conditional_variance_constant = false;
  bool exact = true;
  bool martingale = true;      // when true v_n equals the sum of sigma2
  double v_n_se = 0.0;         // standard error when estimated
};

/// Parameters of the lower-bound construction for given (n, p).
struct CEParams {
  double a = 0.0;
  std::int64_t k = 0;
  std::int64_t m = 0;

  /// a = (n/4)^{1/(2p-2)}, k = smallest integer >= 4a^2 (4a^2 values within
  /// 1e-12 relative of an integer snap to it), m = n - k. Throws DomainError
  /// for n < 20 or p <= 2.
  static CEParams for_n(std::int64_t n, double p);
  /// 1 <= a < sqrt(n)/4 and m >= 7n/10: the window the construction's
  /// moment estimates are stated for. Small n with p = 3 falls outside it.
  bool within_construction_window(std::int64_t n) const;
};

/// P(|S_m| in [a, 2a]) for S_m ~ N(0, m).
double ce_branch_probability(const CEParams& params);
/// Sum of the k trailing increments plus S_m when b of them took the first
/// branch value -S_m/k: S_m (1 - b/k) + (k - b) k / S_m. Exactly 0 for b = k.
double ce_branch_sum(double s_m, std::int64_t k, std::int64_t b);
/// E(|X_j|^p | S_m = x) on the branch: (|x|^p k^{2-p} + k^p |x|^{2-p}) / (x^2 + k^2).
double ce_conditional_abs_moment(double x, std::int64_t k, double p);
/// E|X_j|^p for a trailing index j > m, by quadrature over the law of S_m.
double ce_trailing_abs_moment(const CEParams& params, double p);

struct CEPath {
  std::vector<double> x;  // X_1..X_n
  double s_m = 0.0;
  double s_n = 0.0;
  bool branch = false;
  std::int64_t first_branch_count = 0;
};

/// Full path of the lower-bound construction.
CEPath ce_generate(std::int64_t n, double p, SeedLineage lineage);

/// Sampled path with the auxiliary state each family defines.
struct Path {
  std::vector<double> xi;
  std::vector<int> states;  // chain: Y_0..Y_n
  double sum = 0.0;
  double s_m = 0.0;         // ce_lowerbound
  bool branch = false;      // ce_lowerbound
};

/// Validated spec with everything that does not depend on the random stream
/// precomputed, so that replicates can be drawn cheaply. Immutable and safe
/// to share between threads.
class PathSampler {
 public:
  explicit PathSampler(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  std::int64_t n() const { return spec_.n; }

  Path path(SeedLineage lineage) const;
  /// Terminal sum; see sample_sum.
  double sum(SeedLineage lineage) const;

 private:
  double chain_path(Stream& rng, std::vector<double>* xi, std::vector<int>* states) const;
  double sequential_path(Stream& rng, std::vector<double>* xi) const;
  double linear_path(Stream& rng, std::vector<double>* xi) const;

  ModelSpec spec_;
  std::vector<double> coeffs_;
  double coeff_sq_sum_ = 0.0;
  bool constant_coeffs_ = false;
  std::optional<FiniteChain> chain_;
  std::vector<double> chain_pf_;
  std::optional<CEParams> ce_;
  std::vector<std::pair<int, double>> harmonics_;
};

/// Deterministic function of (spec, lineage). Throws ConfigError on an
/// invalid spec.
Path sample_path(const ModelSpec& spec, SeedLineage lineage);

/// The terminal sum S_n. Agrees in law with the sum of sample_path, using
/// exact shortcuts where the family allows them (S_m ~ N(0, m) for the
/// lower-bound construction, sum of Gaussians, popcount for signs).
double sample_sum(const ModelSpec& spec, SeedLineage lineage);

struct LinearPathResult {
  double s_n = 0.0;
  double v_n = 0.0;
};
LinearPathResult linear_statistic_path(const ModelSpec& spec, SeedLineage lineage);
/// Var(sum alpha_i Y_i), O(n) for AR(1) and O(nq) for MA(q).
double linear_exact_variance(const LinearBase& base, std::span<const double> alphas);

struct ChainPathResult {
  std::vector<double> x;
  double k_n = 0.0;
  double v_n = 0.0;
  double c_n_bound = 0.0;
};
ChainPathResult rho_mixing_path(const ModelSpec& spec, SeedLineage lineage);

struct SequentialPathResult {
  double s_n = 0.0;
  double v_n = 0.0;
};
SequentialPathResult sequential_maps_path(const ModelSpec& spec, SeedLineage lineage);
/// Exact Var(S_n) under Lebesgue measure from the Fourier coefficients of the
/// observable: harmonic h at step k has frequency h M_k, M_k = m_1...m_k.
double sequential_exact_variance(const SequentialParams& params, std::int64_t n);

PathMoments exact_moments(const ModelSpec& spec);
/// Monte Carlo moments from `replicates` paths; flagged exact = false.
PathMoments estimate_moments(const ModelSpec& spec, std::int64_t replicates,
                             std::uint64_t master_seed);

/// Conditional second moments E(xi_k^2 | F_{l-1}) of a martingale model.
class ConditionalOracle {
 public:
  /// Empty for families without a conditional oracle (sequential maps,
  /// linear statistics, the values view of a chain).
  static std::optional<ConditionalOracle> for_model(const ModelSpec& spec);

  /// E(xi_k^2 | F_{k-1}) = sigma_k^2 almost surely.
  bool constant() const { return constant_; }
  /// sum_{k=l}^n E(xi_k^2 | F_{l-1}) on a sampled path, 2 <= l <= n.
  double tail(const Path& path, std::int64_t ell) const;
  /// sum_{k=l}^n sigma_k^2.
  double tail_mean(std::int64_t ell) const;

 private:
  bool constant_ = true;
  std::vector<double> suffix_;                 // suffix_[l] = sum_{k>=l} sigma_k^2
  std::vector<std::vector<double>> table_;     // chain: table_[l][y]
};

}  // namespace cltlab
