// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/chain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cltlab/numerics.hpp"

namespace cltlab {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::vector<double> cumulate(const std::vector<double>& row) {
  std::vector<double> c(row.size());
  std::partial_sum(row.begin(), row.end(), c.begin());
  c.back() = 1.0;
  return c;
}

// Primitive (irreducible and aperiodic) iff some power up to
// (S-1)^2 + 1 is strictly positive (Wielandt).
bool is_primitive(const Matrix& p) {
  const std::size_t s = p.size();
  std::vector<std::vector<char>> reach(s, std::vector<char>(s, 0));
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) reach[i][j] = p[i][j] > 0.0;
  auto power = reach;
  const std::size_t limit = (s - 1) * (s - 1) + 1;
  for (std::size_t step = 1; step <= limit; ++step) {
    bool all = true;
    for (const auto& row : power)
      for (char v : row) all = all && v;
    if (all) return true;
    std::vector<std::vector<char>> next(s, std::vector<char>(s, 0));
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t k = 0; k < s; ++k)
        if (power[i][k])
          for (std::size_t j = 0; j < s; ++j) next[i][j] |= reach[k][j];
    power = std::move(next);
  }
  return false;
}

std::vector<double> solve_stationary(const Matrix& p) {
  const auto s = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd a(s, s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j)
      a(i, j) = p[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] -
                (i == j ? 1.0 : 0.0);
  a.row(s - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s);
  rhs(s - 1) = 1.0;
  const Eigen::VectorXd pi = a.fullPivLu().solve(rhs);
  return std::vector<double>(pi.data(), pi.data() + s);
}

}  // namespace

FiniteChain::FiniteChain(Matrix transition, std::vector<double> f,
                         std::optional<std::vector<double>> initial)
    : transition_(std::move(transition)), f_(std::move(f)) {
  const std::size_t s = transition_.size();
  if (s < 2) throw ConfigError("chain: need at least two states");
  if (f_.size() != s) throw ConfigError("chain: f must have one value per state");
  for (const auto& row : transition_) {
    if (row.size() != s) throw ConfigError("chain: transition matrix must be square");
    double total = 0.0;
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError("chain: transition probabilities must be nonnegative");
      }
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw ConfigError("chain: transition rows must sum to 1");
    }
  }
  for (double v : f_) {
    if (!std::isfinite(v)) throw ConfigError("chain: f values must be finite");
  }
  if (!is_primitive(transition_)) {
    throw ConfigError("chain: transition matrix must be irreducible and aperiodic");
  }
  stationary_ = solve_stationary(transition_);
  if (initial) {
    if (initial->size() != s) {
      throw ConfigError("chain: initial law must have one entry per state");
    }
    double total = 0.0;
    for (double v : *initial) {
      if (!(v >= 0.0)) throw ConfigError("chain: initial law must be nonnegative");
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw ConfigError("chain: initial law must sum to 1");
    }
    initial_ = *initial;
  } else {
    initial_ = stationary_;
  }
  cumulative_.reserve(s);
  for (const auto& row : transition_) cumulative_.push_back(cumulate(row));
  initial_cumulative_ = cumulate(initial_);
}

FiniteChain FiniteChain::two_state(double q, std::vector<double> f) {
  if (!(q > 0.0 && q < 1.0)) {
    throw ConfigError("chain: stay probability q must lie in (0, 1)");
  }
  return FiniteChain({{q, 1.0 - q}, {1.0 - q, q}}, std::move(f));
}

double FiniteChain::rho1() const {
  const auto s = static_cast<Eigen::Index>(states());
  Eigen::MatrixXd m(s, s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j) {
      const auto ui = static_cast<std::size_t>(i);
      const auto uj = static_cast<std::size_t>(j);
      m(i, j) = std::sqrt(stationary_[ui]) * transition_[ui][uj] /
                std::sqrt(stationary_[uj]);
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(1);
}

std::vector<double> FiniteChain::apply(const std::vector<double>& g) const {
  std::vector<double> out(states(), 0.0);
  for (std::size_t i = 0; i < states(); ++i) out[i] = dot(transition_[i], g);
  return out;
}

std::vector<double> FiniteChain::propagate(const std::vector<double>& mu) const {
  std::vector<double> out(states(), 0.0);
  for (std::size_t i = 0; i < states(); ++i)
    for (std::size_t j = 0; j < states(); ++j) out[j] += mu[i] * transition_[i][j];
  return out;
}

int FiniteChain::step(int state, double u) const {
  const auto& c = cumulative_[static_cast<std::size_t>(state)];
  int j = 0;
  while (u >= c[static_cast<std::size_t>(j)]) ++j;
  return j;
}

int FiniteChain::initial_state(double u) const {
  int j = 0;
  while (u >= initial_cumulative_[static_cast<std::size_t>(j)]) ++j;
  return j;
}

double FiniteChain::stationary_mean() const { return dot(stationary_, f_); }

double FiniteChain::k_n() const {
  double k = 0.0;
  for (double v : f_) k = std::max(k, std::fabs(v));
  return k;
}

std::vector<double> FiniteChain::law_at(std::int64_t k) const {
  std::vector<double> mu = initial_;
  for (std::int64_t i = 0; i < k; ++i) mu = propagate(mu);
  return mu;
}

std::vector<double> FiniteChain::marginal_variances(std::int64_t n) const {
  std::vector<double> f2(states());
  for (std::size_t i = 0; i < states(); ++i) f2[i] = f_[i] * f_[i];
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<double> mu = initial_;
  for (std::int64_t k = 1; k <= n; ++k) {
    mu = propagate(mu);
    const double mean = dot(mu, f_);
    out.push_back(dot(mu, f2) - mean * mean);
  }
  return out;
}

std::vector<double> FiniteChain::tail_variances(std::int64_t n) const {
  const std::size_t len = static_cast<std::size_t>(n);
  Matrix laws(len);
  std::vector<double> mu = initial_;
  for (std::size_t i = 0; i < len; ++i) {
    mu = propagate(mu);
    laws[i] = mu;
  }
  std::vector<double> f2(states());
  for (std::size_t i = 0; i < states(); ++i) f2[i] = f_[i] * f_[i];

  // h_i = sum_{j=i}^n P^{j-i} f, built backwards.
  std::vector<double> h = f_;
  std::vector<double> out(len);
  double second = 0.0;
  double mean = 0.0;
  for (std::size_t idx = len; idx-- > 0;) {
    if (idx + 1 < len) {
      h = apply(h);
      for (std::size_t s = 0; s < states(); ++s) h[s] += f_[s];
    }
    std::vector<double> fh(states());
    for (std::size_t s = 0; s < states(); ++s) fh[s] = f_[s] * h[s];
    second += 2.0 * dot(laws[idx], fh) - dot(laws[idx], f2);
    mean += dot(laws[idx], f_);
    out[idx] = second - mean * mean;
  }
  return out;
}

double FiniteChain::exact_variance(std::int64_t n) const {
  return tail_variances(n).front();
}

double FiniteChain::c_n(std::int64_t n) const {
  const auto tails = tail_variances(n);
  const auto marg = marginal_variances(n);
  double sum_marg = 0.0;
  double best = 0.0;
  for (std::size_t idx = tails.size(); idx-- > 0;) {
    sum_marg += marg[idx];
    if (tails[idx] > 0.0) best = std::max(best, sum_marg / tails[idx]);
  }
  return best;
}

std::vector<double> FiniteChain::conditional_variance() const {
  const auto pf = apply(f_);
  std::vector<double> f2(states());
  for (std::size_t i = 0; i < states(); ++i) f2[i] = f_[i] * f_[i];
  const auto pf2 = apply(f2);
  std::vector<double> w(states());
  for (std::size_t i = 0; i < states(); ++i)
    w[i] = std::max(0.0, pf2[i] - pf[i] * pf[i]);
  return w;
}

bool FiniteChain::conditional_variance_constant() const {
  const auto w = conditional_variance();
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  return *hi - *lo <= 1e-15 * std::max(1.0, *hi);
}

std::vector<double> FiniteChain::martingale_sigma2(std::int64_t n) const {
  const auto w = conditional_variance();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<double> mu = initial_;
  for (std::int64_t k = 1; k <= n; ++k) {
    out.push_back(dot(mu, w));
    mu = propagate(mu);
  }
  return out;
}

std::vector<std::vector<double>> FiniteChain::conditional_tails(std::int64_t n) const {
  const auto w = conditional_variance();
  std::vector<std::vector<double>> table(static_cast<std::size_t>(n + 1));
  std::vector<double> g = w;
  for (std::int64_t ell = n; ell >= 2; --ell) {
    if (ell < n) {
      g = apply(g);
      for (std::size_t s = 0; s < states(); ++s) g[s] += w[s];
    }
    table[static_cast<std::size_t>(ell)] = g;
  }
  return table;
}

std::vector<double> FiniteChain::u_exact(std::int64_t n, double p) const {
  if (n < 2) return {};
  const auto sigma2 = martingale_sigma2(n);
  const auto tails = conditional_tails(n);
  const auto pf = apply(f_);
  std::vector<double> suffix(static_cast<std::size_t>(n + 2), 0.0);
  for (std::int64_t k = n; k >= 1; --k)
    suffix[static_cast<std::size_t>(k)] =
        suffix[static_cast<std::size_t>(k + 1)] + sigma2[static_cast<std::size_t>(k - 1)];

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n - 1));
  std::vector<double> mu = initial_;  // law of Y_{l-2}
  for (std::int64_t ell = 2; ell <= n; ++ell) {
    const double sigma_prev = std::sqrt(sigma2[static_cast<std::size_t>(ell - 2)]);
    const auto& g = tails[static_cast<std::size_t>(ell)];
    const double centre = suffix[static_cast<std::size_t>(ell)];
    double acc = 0.0;
    for (std::size_t i = 0; i < states(); ++i) {
      if (mu[i] == 0.0) continue;
      for (std::size_t j = 0; j < states(); ++j) {
        const double prob = mu[i] * transition_[i][j];
        if (prob == 0.0) continue;
        const double xi = f_[j] - pf[i];
        const double weight = std::pow(std::max(std::fabs(xi), sigma_prev), p - 2.0);
        acc += prob * weight * std::fabs(g[j] - centre);
      }
    }
    out.push_back(acc);
    mu = propagate(mu);
  }
  return out;
}

double FiniteChain::martingale_abs_moment(std::int64_t k, double p) const {
  const auto mu = law_at(k - 1);
  const auto pf = apply(f_);
  double acc = 0.0;
  for (std::size_t i = 0; i < states(); ++i)
    for (std::size_t j = 0; j < states(); ++j)
      acc += mu[i] * transition_[i][j] * std::pow(std::fabs(f_[j] - pf[i]), p);
  return acc;
}

}  // namespace cltlab
