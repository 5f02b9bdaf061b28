// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace cltlab {

using Matrix = std::vector<std::vector<double>>;

/// Finite-state Markov chain Y_0, Y_1, ... with a per-state observable f.
///
/// Two processes are derived from it:
///   values view:      X_k = f(Y_k),                   k = 1..n
///   martingale view:  xi_k = f(Y_k) - (P f)(Y_{k-1}), k = 1..n
/// with Y_0 drawn from the initial law (the stationary law by default).
class FiniteChain {
 public:
  /// Throws ConfigError for a non-stochastic matrix or a chain that is not
  /// irreducible and aperiodic.
  FiniteChain(Matrix transition, std::vector<double> f,
              std::optional<std::vector<double>> initial = std::nullopt);

  /// Two-state chain that stays put with probability q.
  static FiniteChain two_state(double q, std::vector<double> f = {1.0, -1.0});

  std::size_t states() const { return transition_.size(); }
  const Matrix& transition() const { return transition_; }
  const std::vector<double>& f() const { return f_; }
  const std::vector<double>& stationary() const { return stationary_; }
  const std::vector<double>& initial() const { return initial_; }

  /// Lag-one maximal correlation of the stationary chain: the second singular
  /// value of D^{1/2} P D^{-1/2}, D = diag(stationary). Equals the second
  /// largest eigenvalue modulus for reversible chains.
  double rho1() const;

  /// (P g)(y).
  std::vector<double> apply(const std::vector<double>& g) const;
  /// (mu P)(y).
  std::vector<double> propagate(const std::vector<double>& mu) const;
  /// Next state from `state` given a uniform u in [0, 1).
  int step(int state, double u) const;
  /// Initial state from a uniform u in [0, 1).
  int initial_state(double u) const;

  // Values view.
  double stationary_mean() const;
  /// Var(f(Y_k)) for k = 1..n.
  std::vector<double> marginal_variances(std::int64_t n) const;
  /// Var(sum_{i=l}^n f(Y_i)) for l = 1..n (index l-1).
  std::vector<double> tail_variances(std::int64_t n) const;
  /// Var(sum_{k=1}^n f(Y_k)).
  double exact_variance(std::int64_t n) const;
  /// max_l sum_{i>=l} Var X_i / Var(S_n - S_{l-1}).
  double c_n(std::int64_t n) const;
  double k_n() const;

  // Martingale view.
  /// w(y) = Var(f(Y_1) | Y_0 = y) = E(xi_k^2 | Y_{k-1} = y).
  std::vector<double> conditional_variance() const;
  bool conditional_variance_constant() const;
  /// sigma_k^2 = E xi_k^2 for k = 1..n.
  std::vector<double> martingale_sigma2(std::int64_t n) const;
  /// table[l][y] = sum_{k=l}^n E(xi_k^2 | Y_{l-1} = y) for l = 2..n; rows 0
  /// and 1 are empty.
  std::vector<std::vector<double>> conditional_tails(std::int64_t n) const;
  /// U_{l,n}(p) for l = 2..n computed by summing over (Y_{l-2}, Y_{l-1});
  /// index l-2.
  std::vector<double> u_exact(std::int64_t n, double p) const;
  /// E|xi_k|^p.
  double martingale_abs_moment(std::int64_t k, double p) const;
  /// Law of Y_k.
  std::vector<double> law_at(std::int64_t k) const;

 private:
  Matrix transition_;
  Matrix cumulative_;
  std::vector<double> f_;
  std::vector<double> stationary_;
  std::vector<double> initial_;
  std::vector<double> initial_cumulative_;
};

}  // namespace cltlab
