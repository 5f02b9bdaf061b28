// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cltlab/numerics.hpp"

namespace cltlab {

std::string to_string(Family family) {
  switch (family) {
    case Family::gaussian_iid: return "gaussian_iid";
    case Family::rademacher_iid: return "rademacher_iid";
    case Family::ce_lowerbound: return "ce_lowerbound";
    case Family::linear_statistic: return "linear_statistic";
    case Family::rho_mixing_chain: return "rho_mixing_chain";
    case Family::sequential_maps: return "sequential_maps";
  }
  return "unknown";
}

Family family_from_string(const std::string& tag) {
  for (Family f : {Family::gaussian_iid, Family::rademacher_iid, Family::ce_lowerbound,
                   Family::linear_statistic, Family::rho_mixing_chain,
                   Family::sequential_maps}) {
    if (to_string(f) == tag) return f;
  }
  throw ConfigError("unknown model family '" + tag + "'");
}

std::string to_string(Observable obs) {
  return obs == Observable::cos1 ? "cos1" : "cos12";
}

Observable observable_from_string(const std::string& tag) {
  if (tag == "cos1") return Observable::cos1;
  if (tag == "cos12") return Observable::cos12;
  throw ConfigError("unknown observable '" + tag + "' (expected cos1 or cos12)");
}

// ---------------------------------------------------------------------------
// Coefficients and bases

double CoefficientRule::at(std::int64_t k, std::int64_t n) const {
  switch (kind) {
    case Kind::constant: return kappa;
    case Kind::power: return kappa * std::pow(static_cast<double>(k), alpha);
    case Kind::ramp:
      return kappa * (1.0 + static_cast<double>(k) / static_cast<double>(n));
    case Kind::list: return values.at(static_cast<std::size_t>(k - 1));
  }
  return 0.0;
}

std::vector<double> CoefficientRule::materialize(std::int64_t n) const {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t k = 1; k <= n; ++k) out[static_cast<std::size_t>(k - 1)] = at(k, n);
  return out;
}

double LinearBase::autocovariance(std::int64_t k) const {
  k = std::abs(k);
  if (kind == Kind::ar1) {
    return std::pow(phi, static_cast<double>(k)) / (1.0 - phi * phi);
  }
  double acc = 0.0;
  for (std::size_t j = 0; j + static_cast<std::size_t>(k) < ma_coeffs.size(); ++j)
    acc += ma_coeffs[j] * ma_coeffs[j + static_cast<std::size_t>(k)];
  return acc;
}

double LinearBase::long_run_variance() const {
  if (kind == Kind::ar1) return 1.0 / ((1.0 - phi) * (1.0 - phi));
  double s = 0.0;
  for (double c : ma_coeffs) s += c;
  return s * s;
}

FiniteChain ChainParams::build() const { return FiniteChain(transition, f, initial); }

// ---------------------------------------------------------------------------
// Spec validation

namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

std::vector<std::pair<int, double>> harmonics_of(Observable obs) {
  if (obs == Observable::cos1) return {{1, std::numbers::sqrt2}};
  return {{1, 1.0}, {2, 0.5}};
}

}  // namespace

void ModelSpec::validate() const {
  if (n < 1) fail("n must be >= 1 (got " + std::to_string(n) + ")");
  if (family == Family::ce_lowerbound) {
    if (!(p > 2.0) || !std::isfinite(p)) fail("ce_lowerbound requires p > 2");
    if (n < 20) {
      fail("ce_lowerbound requires n >= 20 (the construction is defined for "
           "p > 2 and n >= 20; got n = " + std::to_string(n) + ")");
    }
  } else if (!(p > 2.0 && p <= 3.0)) {
    fail("p must lie in (2, 3]");
  }

  const bool uses_coeffs = family == Family::gaussian_iid ||
                           family == Family::rademacher_iid ||
                           family == Family::linear_statistic;
  if (uses_coeffs) {
    if (coefficients.kind == CoefficientRule::Kind::list &&
        coefficients.values.size() < static_cast<std::size_t>(n)) {
      fail("coefficient list shorter than n");
    }
    if (coefficients.kind == CoefficientRule::Kind::power &&
        family == Family::linear_statistic && !(coefficients.alpha > -0.5)) {
      fail("power coefficient rule requires alpha > -1/2");
    }
    double sq = 0.0;
    for (std::int64_t k = 1; k <= n; ++k) {
      const double c = coefficients.at(k, n);
      if (!std::isfinite(c)) fail("coefficients must be finite");
      if (family != Family::linear_statistic && !(c > 0.0)) {
        fail("variance parameters sigma_k must be > 0 (k = " + std::to_string(k) + ")");
      }
      sq += c * c;
    }
    if (!(sq > 0.0)) fail("coefficients must not all vanish");
  }

  if (family == Family::linear_statistic) {
    if (base.kind == LinearBase::Kind::ar1) {
      if (!(std::fabs(base.phi) < 1.0)) {
        fail("AR(1) base requires |phi| < 1 for stationarity");
      }
    } else {
      if (base.ma_coeffs.empty()) fail("MA base requires coefficients");
      double sq = 0.0;
      for (double c : base.ma_coeffs) {
        if (!std::isfinite(c)) fail("MA coefficients must be finite");
        sq += c * c;
      }
      if (!(sq > 0.0)) fail("MA coefficients must not all vanish");
    }
  }

  if (family == Family::rho_mixing_chain) {
    const FiniteChain c = chain.build();
    if (chain.view == ChainView::values) {
      const double mean = c.stationary_mean();
      if (std::fabs(mean) > 1e-12 * std::max(1.0, c.k_n())) {
        fail("chain observable f must be centered under the stationary law");
      }
    }
  }

  if (family == Family::sequential_maps) {
    if (sequential.schedule.empty()) fail("map schedule must not be empty");
    for (int m : sequential.schedule) {
      if (m < 2) fail("map multipliers m_k must be >= 2 (expansion lost)");
    }
  }
}

ModelSpec ModelSpec::with_n(std::int64_t new_n) const {
  ModelSpec copy = *this;
  copy.n = new_n;
  return copy;
}

bool ModelSpec::is_martingale() const {
  switch (family) {
    case Family::gaussian_iid:
    case Family::rademacher_iid:
    case Family::ce_lowerbound: return true;
    case Family::rho_mixing_chain: return chain.view == ChainView::martingale;
    default: return false;
  }
}

// ---------------------------------------------------------------------------
// Lower-bound construction

CEParams CEParams::for_n(std::int64_t n, double p) {
  if (n < 20) throw DomainError("ce: the construction requires n >= 20");
  if (!(p > 2.0)) throw DomainError("ce: the construction requires p > 2");
  const double quarter = static_cast<double>(n) / 4.0;
  CEParams params;
  params.a = std::pow(quarter, 1.0 / (2.0 * p - 2.0));
  const double four_a2 = 4.0 * std::pow(quarter, 1.0 / (p - 1.0));
  const double nearest = std::round(four_a2);
  params.k = static_cast<std::int64_t>(
      std::fabs(four_a2 - nearest) <= 1e-12 * four_a2 ? nearest : std::ceil(four_a2));
  params.m = n - params.k;
  return params;
}

bool CEParams::within_construction_window(std::int64_t n) const {
  const double nd = static_cast<double>(n);
  return a >= 1.0 && a < std::sqrt(nd) / 4.0 &&
         static_cast<double>(k) < 1.0 + nd / 4.0 &&
         static_cast<double>(m) >= 0.7 * nd;
}

double ce_branch_probability(const CEParams& params) {
  const double sd = std::sqrt(static_cast<double>(params.m));
  return 2.0 * (normal_cdf(2.0 * params.a / sd) - normal_cdf(params.a / sd));
}

double ce_branch_sum(double s_m, std::int64_t k, std::int64_t b) {
  // S_m + b (-S_m/k) + (k-b) k/S_m factored so that b = k gives exactly 0.
  const double kd = static_cast<double>(k);
  return static_cast<double>(k - b) * (s_m / kd + kd / s_m);
}

double ce_conditional_abs_moment(double x, std::int64_t k, double p) {
  const double ax = std::fabs(x);
  const double kd = static_cast<double>(k);
  return (std::pow(ax, p) * std::pow(kd, 2.0 - p) + std::pow(kd, p) * std::pow(ax, 2.0 - p)) /
         (x * x + kd * kd);
}

double ce_trailing_abs_moment(const CEParams& params, double p) {
  const double sd = std::sqrt(static_cast<double>(params.m));
  const double on_branch = integrate(
      [&](double x) {
        return ce_conditional_abs_moment(x, params.k, p) * normal_pdf(x / sd) / sd;
      },
      params.a, 2.0 * params.a, 1e-14);
  return normal_abs_moment(p) * (1.0 - ce_branch_probability(params)) + 2.0 * on_branch;
}

namespace {

bool in_branch(double s_m, double a) {
  const double abs_s = std::fabs(s_m);
  return abs_s >= a && abs_s <= 2.0 * a;
}

}  // namespace

CEPath ce_generate(std::int64_t n, double p, SeedLineage lineage) {
  const CEParams params = CEParams::for_n(n, p);
  Stream rng(lineage);
  CEPath out;
  out.x.resize(static_cast<std::size_t>(n));
  double s = 0.0;
  for (std::int64_t j = 0; j < params.m; ++j) {
    const double v = rng.normal();
    out.x[static_cast<std::size_t>(j)] = v;
    s += v;
  }
  out.s_m = s;
  out.branch = in_branch(s, params.a);
  if (out.branch) {
    const double kd = static_cast<double>(params.k);
    const double threshold = kd * kd / (s * s + kd * kd);
    const double low = -s / kd;
    const double high = kd / s;
    std::int64_t b = 0;
    for (std::int64_t j = params.m; j < n; ++j) {
      const bool first = rng.uniform() <= threshold;
      b += first ? 1 : 0;
      out.x[static_cast<std::size_t>(j)] = first ? low : high;
    }
    out.first_branch_count = b;
    out.s_n = ce_branch_sum(s, params.k, b);
  } else {
    double tail = 0.0;
    for (std::int64_t j = params.m; j < n; ++j) {
      const double v = rng.normal();
      out.x[static_cast<std::size_t>(j)] = v;
      tail += v;
    }
    out.s_n = s + tail;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampler

PathSampler::PathSampler(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  switch (spec_.family) {
    case Family::gaussian_iid:
    case Family::rademacher_iid:
    case Family::linear_statistic: {
      coeffs_ = spec_.coefficients.materialize(spec_.n);
      for (double c : coeffs_) coeff_sq_sum_ += c * c;
      constant_coeffs_ = std::all_of(coeffs_.begin(), coeffs_.end(),
                                     [&](double c) { return c == coeffs_.front(); });
      break;
    }
    case Family::ce_lowerbound: ce_ = CEParams::for_n(spec_.n, spec_.p); break;
    case Family::rho_mixing_chain: {
      chain_ = spec_.chain.build();
      chain_pf_ = chain_->apply(chain_->f());
      break;
    }
    case Family::sequential_maps: harmonics_ = harmonics_of(spec_.sequential.observable); break;
  }
}

double PathSampler::linear_path(Stream& rng, std::vector<double>* xi) const {
  const auto n = static_cast<std::size_t>(spec_.n);
  const LinearBase& base = spec_.base;
  double sum = 0.0;
  if (base.kind == LinearBase::Kind::ar1) {
    double y = std::sqrt(base.autocovariance(0)) * rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) y = base.phi * y + rng.normal();
      const double x = coeffs_[i] * y;
      if (xi) (*xi)[i] = x;
      sum += x;
    }
    return sum;
  }
  const std::size_t q = base.ma_coeffs.size() - 1;
  std::vector<double> innov(n + q);
  for (double& e : innov) e = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.0;
    // innov[i + q] is e_{i+1}; theta_j multiplies e_{i+1-j}.
    for (std::size_t j = 0; j <= q; ++j) y += base.ma_coeffs[j] * innov[i + q - j];
    const double x = coeffs_[i] * y;
    if (xi) (*xi)[i] = x;
    sum += x;
  }
  return sum;
}

double PathSampler::chain_path(Stream& rng, std::vector<double>* xi,
                               std::vector<int>* states) const {
  const auto n = static_cast<std::size_t>(spec_.n);
  const auto& f = chain_->f();
  const bool martingale = spec_.chain.view == ChainView::martingale;
  int y = chain_->initial_state(rng.uniform());
  if (states) (*states)[0] = y;
  double sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const int next = chain_->step(y, rng.uniform());
    const double v = martingale ? f[static_cast<std::size_t>(next)] -
                                      chain_pf_[static_cast<std::size_t>(y)]
                                : f[static_cast<std::size_t>(next)];
    if (xi) (*xi)[k - 1] = v;
    if (states) (*states)[k] = next;
    sum += v;
    y = next;
  }
  return sum;
}

double PathSampler::sequential_path(Stream& rng, std::vector<double>* xi) const {
  // x = sum_i d_i / (m_1...m_i) with independent uniform digits d_i is
  // uniform on [0,1], and tau_k(x) = (d_{k+1} + tau_{k+1}(x)) / m_{k+1}.
  // Digits are drawn until the remaining product exceeds 2^64, then the
  // orbit is recovered backwards without loss of precision.
  const std::int64_t n = spec_.n;
  const auto& params = spec_.sequential;
  std::int64_t total = n;
  double log2_tail = 0.0;
  while (log2_tail < 64.0) {
    ++total;
    log2_tail += std::log2(static_cast<double>(params.m_at(total)));
  }
  thread_local std::vector<std::uint32_t> digits;
  digits.resize(static_cast<std::size_t>(total));
  for (std::int64_t i = 1; i <= total; ++i) {
    digits[static_cast<std::size_t>(i - 1)] =
        static_cast<std::uint32_t>(rng.below(static_cast<std::uint64_t>(params.m_at(i))));
  }
  double y = rng.uniform();
  for (std::int64_t i = total; i > n; --i) {
    y = (digits[static_cast<std::size_t>(i - 1)] + y) / params.m_at(i);
  }
  // y is now tau_n(x).
  double sum = 0.0;
  for (std::int64_t k = n; k >= 1; --k) {
    double v = 0.0;
    for (const auto& [h, c] : harmonics_) v += c * std::cos(2.0 * std::numbers::pi * h * y);
    if (xi) (*xi)[static_cast<std::size_t>(k - 1)] = v;
    sum += v;
    y = (digits[static_cast<std::size_t>(k - 1)] + y) / params.m_at(k);
  }
  return sum;
}

Path PathSampler::path(SeedLineage lineage) const {
  Path out;
  const auto n = static_cast<std::size_t>(spec_.n);
  out.xi.resize(n);
  switch (spec_.family) {
    case Family::gaussian_iid: {
      Stream rng(lineage);
      for (std::size_t k = 0; k < n; ++k) {
        out.xi[k] = coeffs_[k] * rng.normal();
        out.sum += out.xi[k];
      }
      break;
    }
    case Family::rademacher_iid: {
      Stream rng(lineage);
      std::uint64_t word = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (k % 64 == 0) word = rng();
        const bool plus = (word >> (k % 64)) & 1u;
        out.xi[k] = plus ? coeffs_[k] : -coeffs_[k];
        out.sum += out.xi[k];
      }
      break;
    }
    case Family::ce_lowerbound: {
      CEPath ce = ce_generate(spec_.n, spec_.p, lineage);
      out.xi = std::move(ce.x);
      out.sum = ce.s_n;
      out.s_m = ce.s_m;
      out.branch = ce.branch;
      break;
    }
    case Family::linear_statistic: {
      Stream rng(lineage);
      out.sum = linear_path(rng, &out.xi);
      break;
    }
    case Family::rho_mixing_chain: {
      Stream rng(lineage);
      out.states.resize(n + 1);
      out.sum = chain_path(rng, &out.xi, &out.states);
      break;
    }
    case Family::sequential_maps: {
      Stream rng(lineage);
      out.sum = sequential_path(rng, &out.xi);
      break;
    }
  }
  return out;
}

double PathSampler::sum(SeedLineage lineage) const {
  Stream rng(lineage);
  switch (spec_.family) {
    case Family::gaussian_iid: return std::sqrt(coeff_sq_sum_) * rng.normal();
    case Family::rademacher_iid: {
      const std::int64_t n = spec_.n;
      if (constant_coeffs_) {
        std::int64_t ones = 0;
        for (std::int64_t done = 0; done < n; done += 64) {
          std::uint64_t word = rng();
          const std::int64_t take = std::min<std::int64_t>(64, n - done);
          if (take < 64) word &= (std::uint64_t{1} << take) - 1;
          ones += std::popcount(word);
        }
        return coeffs_.front() * static_cast<double>(2 * ones - n);
      }
      double s = 0.0;
      std::uint64_t word = 0;
      for (std::int64_t k = 0; k < n; ++k) {
        if (k % 64 == 0) word = rng();
        const double c = coeffs_[static_cast<std::size_t>(k)];
        s += ((word >> (k % 64)) & 1u) ? c : -c;
      }
      return s;
    }
    case Family::ce_lowerbound: {
      const CEParams& params = *ce_;
      const double s_m = std::sqrt(static_cast<double>(params.m)) * rng.normal();
      if (in_branch(s_m, params.a)) {
        const double kd = static_cast<double>(params.k);
        const double threshold = kd * kd / (s_m * s_m + kd * kd);
        std::int64_t b = 0;
        for (std::int64_t j = 0; j < params.k; ++j) b += rng.uniform() <= threshold ? 1 : 0;
        return ce_branch_sum(s_m, params.k, b);
      }
      return s_m + std::sqrt(static_cast<double>(params.k)) * rng.normal();
    }
    case Family::linear_statistic: return linear_path(rng, nullptr);
    case Family::rho_mixing_chain: return chain_path(rng, nullptr, nullptr);
    case Family::sequential_maps: return sequential_path(rng, nullptr);
  }
  return 0.0;
}

Path sample_path(const ModelSpec& spec, SeedLineage lineage) {
  return PathSampler(spec).path(lineage);
}

double sample_sum(const ModelSpec& spec, SeedLineage lineage) {
  return PathSampler(spec).sum(lineage);
}

// ---------------------------------------------------------------------------
// Family-specific entry points

double linear_exact_variance(const LinearBase& base, std::span<const double> alphas) {
  const std::size_t n = alphas.size();
  if (base.kind == LinearBase::Kind::ar1) {
    const double g0 = base.autocovariance(0);
    double diag = 0.0;
    double cross = 0.0;
    double r = 0.0;  // sum_{i<j} alpha_i phi^{j-i}
    for (std::size_t j = 0; j < n; ++j) {
      if (j > 0) r = base.phi * (r + alphas[j - 1]);
      diag += alphas[j] * alphas[j];
      cross += alphas[j] * r;
    }
    return g0 * (diag + 2.0 * cross);
  }
  const std::size_t q = base.ma_coeffs.size() - 1;
  std::vector<double> gamma(q + 1);
  for (std::size_t k = 0; k <= q; ++k) gamma[k] = base.autocovariance(static_cast<std::int64_t>(k));
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v += alphas[i] * alphas[i] * gamma[0];
    for (std::size_t k = 1; k <= q && i + k < n; ++k)
      v += 2.0 * alphas[i] * alphas[i + k] * gamma[k];
  }
  return v;
}

LinearPathResult linear_statistic_path(const ModelSpec& spec, SeedLineage lineage) {
  if (spec.family != Family::linear_statistic) {
    throw ConfigError("linear_statistic_path: spec family must be linear_statistic");
  }
  const PathSampler sampler(spec);
  const auto alphas = spec.coefficients.materialize(spec.n);
  return {sampler.sum(lineage), linear_exact_variance(spec.base, alphas)};
}

ChainPathResult rho_mixing_path(const ModelSpec& spec, SeedLineage lineage) {
  if (spec.family != Family::rho_mixing_chain) {
    throw ConfigError("rho_mixing_path: spec family must be rho_mixing_chain");
  }
  const PathSampler sampler(spec);
  const FiniteChain chain = spec.chain.build();
  Path path = sampler.path(lineage);
  const double rho = chain.rho1();
  return {std::move(path.xi), chain.k_n(), chain.exact_variance(spec.n),
          (1.0 + rho) / (1.0 - rho)};
}

double sequential_exact_variance(const SequentialParams& params, std::int64_t n) {
  const auto harmonics = harmonics_of(params.observable);
  int max_h = 0;
  double diag = 0.0;
  for (const auto& [h, c] : harmonics) {
    max_h = std::max(max_h, h);
    diag += 0.5 * c * c;
  }
  double v = diag * static_cast<double>(n);
  // Frequencies h M_k and h' M_j (k < j) coincide iff h = h' m_{k+1}...m_j.
  for (std::int64_t k = 1; k < n; ++k) {
    std::int64_t product = 1;
    for (std::int64_t j = k + 1; j <= n; ++j) {
      product *= params.m_at(j);
      if (product > max_h) break;
      for (const auto& [h, c] : harmonics)
        for (const auto& [h2, c2] : harmonics)
          if (h == h2 * product) v += c * c2;
    }
  }
  return v;
}

SequentialPathResult sequential_maps_path(const ModelSpec& spec, SeedLineage lineage) {
  if (spec.family != Family::sequential_maps) {
    throw ConfigError("sequential_maps_path: spec family must be sequential_maps");
  }
  const PathSampler sampler(spec);
  return {sampler.sum(lineage), sequential_exact_variance(spec.sequential, spec.n)};
}

PathMoments exact_moments(const ModelSpec& spec) {
  spec.validate();
  PathMoments m;
  const auto n = spec.n;
  switch (spec.family) {
    case Family::gaussian_iid:
    case Family::rademacher_iid: {
      for (double c : spec.coefficients.materialize(n)) m.sigma2.push_back(c * c);
      m.conditional_variance_constant = true;
      break;
    }
    case Family::ce_lowerbound: {
      m.sigma2.assign(static_cast<std::size_t>(n), 1.0);
      m.conditional_variance_constant = true;
      break;
    }
    case Family::linear_statistic: {
      const auto alphas = spec.coefficients.materialize(n);
      const double g0 = spec.base.autocovariance(0);
      for (double a : alphas) m.sigma2.push_back(a * a * g0);
      m.martingale = false;
      m.v_n = linear_exact_variance(spec.base, alphas);
      break;
    }
    case Family::rho_mixing_chain: {
      const FiniteChain chain = spec.chain.build();
      if (spec.chain.view == ChainView::martingale) {
        m.sigma2 = chain.martingale_sigma2(n);
        m.conditional_variance_constant = chain.conditional_variance_constant();
      } else {
        m.sigma2 = chain.marginal_variances(n);
        m.martingale = false;
        m.v_n = chain.exact_variance(n);
      }
      break;
    }
    case Family::sequential_maps: {
      double per_step = 0.0;
      for (const auto& [h, c] : harmonics_of(spec.sequential.observable)) per_step += 0.5 * c * c;
      m.sigma2.assign(static_cast<std::size_t>(n), per_step);
      m.martingale = false;
      m.v_n = sequential_exact_variance(spec.sequential, n);
      break;
    }
  }
  if (m.martingale) {
    m.v_n = 0.0;
    for (double s : m.sigma2) m.v_n += s;
  }
  for (double s : m.sigma2) m.delta_n = std::max(m.delta_n, std::sqrt(s));
  return m;
}

PathMoments estimate_moments(const ModelSpec& spec, std::int64_t replicates,
                             std::uint64_t master_seed) {
  if (replicates < 2) throw DomainError("estimate_moments: need at least 2 replicates");
  const PathSampler sampler(spec);
  const auto n = static_cast<std::size_t>(spec.n);
  std::vector<double> mean(n, 0.0), second(n, 0.0);
  std::vector<double> sums;
  sums.reserve(static_cast<std::size_t>(replicates));
  for (std::int64_t r = 0; r < replicates; ++r) {
    const Path path = sampler.path({master_seed, static_cast<std::uint64_t>(r)});
    for (std::size_t k = 0; k < n; ++k) {
      mean[k] += path.xi[k];
      second[k] += path.xi[k] * path.xi[k];
    }
    sums.push_back(path.sum);
  }
  const double rd = static_cast<double>(replicates);
  PathMoments m;
  m.exact = false;
  m.martingale = spec.is_martingale();
  for (std::size_t k = 0; k < n; ++k) {
    const double mu = mean[k] / rd;
    m.sigma2.push_back(second[k] / rd - mu * mu);
    m.delta_n = std::max(m.delta_n, std::sqrt(m.sigma2.back()));
  }
  double s_mean = 0.0;
  for (double s : sums) s_mean += s;
  s_mean /= rd;
  double var = 0.0;
  for (double s : sums) var += (s - s_mean) * (s - s_mean);
  var /= rd - 1.0;
  double fourth = 0.0;
  for (double s : sums) {
    const double d = (s - s_mean) * (s - s_mean) - var;
    fourth += d * d;
  }
  m.v_n = var;
  m.v_n_se = std::sqrt(fourth / (rd - 1.0) / rd);
  return m;
}

// ---------------------------------------------------------------------------
// Conditional oracle

std::optional<ConditionalOracle> ConditionalOracle::for_model(const ModelSpec& spec) {
  if (!spec.is_martingale()) return std::nullopt;
  ConditionalOracle oracle;
  const PathMoments moments = exact_moments(spec);
  const auto n = static_cast<std::size_t>(spec.n);
  oracle.suffix_.assign(n + 2, 0.0);
  for (std::size_t k = n; k >= 1; --k)
    oracle.suffix_[k] = oracle.suffix_[k + 1] + moments.sigma2[k - 1];
  oracle.constant_ = moments.conditional_variance_constant;
  if (spec.family == Family::rho_mixing_chain && !oracle.constant_) {
    oracle.table_ = spec.chain.build().conditional_tails(spec.n);
  }
  return oracle;
}

double ConditionalOracle::tail(const Path& path, std::int64_t ell) const {
  if (constant_) return tail_mean(ell);
  return table_[static_cast<std::size_t>(ell)]
               [static_cast<std::size_t>(path.states[static_cast<std::size_t>(ell - 1)])];
}

double ConditionalOracle::tail_mean(std::int64_t ell) const {
  return suffix_[static_cast<std::size_t>(ell)];
}

}  // namespace cltlab
