// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>

#include "cltlab/io.hpp"
#include "cltlab/numerics.hpp"
#include "cltlab/parallel.hpp"

namespace cltlab {

namespace {

constexpr double kFourSqrt2 = 4.0 * std::numbers::sqrt2;
constexpr std::int64_t kMcBlock = 1024;

void require_p(double p, double hi = 3.0) {
  if (!(p > 2.0 && p <= hi)) {
    throw DomainError("p must lie in (2, " + std::to_string(static_cast<int>(hi)) + "]");
  }
}

void require_martingale(const ModelSpec& spec, const char* what) {
  if (!spec.is_martingale()) {
    throw DomainError(std::string(what) + ": the model is not a martingale difference sequence");
  }
}

double min_h(double t, double v) {
  const double v2 = v * v;
  return std::min(t * v2, v2 * std::fabs(v));
}

// Two-point law of the lower-bound construction's trailing increments given
// S_m = x on the branch: -x/k with weight k^2/(x^2+k^2), k/x otherwise.
template <class G>
double ce_branch_expectation(const CEParams& params, G&& g) {
  const double sd = std::sqrt(static_cast<double>(params.m));
  const double kd = static_cast<double>(params.k);
  return 2.0 * integrate(
                   [&](double x) {
                     const double low_w = kd * kd / (x * x + kd * kd);
                     return (low_w * g(x / kd) + (1.0 - low_w) * g(kd / x)) *
                            normal_pdf(x / sd) / sd;
                   },
                   params.a, 2.0 * params.a, 1e-13);
}

// Per-step laws of chain martingale increments, deduplicated over k.
struct ChainIncrementLaw {
  std::vector<double> values;
  std::vector<double> weights;
  double sigma2 = 0.0;
};

std::vector<ChainIncrementLaw> chain_increment_laws(const ModelSpec& spec) {
  const FiniteChain chain = spec.chain.build();
  const auto& f = chain.f();
  const auto pf = chain.apply(f);
  const auto& tr = chain.transition();
  std::vector<ChainIncrementLaw> out;
  std::vector<double> law = chain.initial();
  std::vector<double> previous;
  for (std::int64_t k = 1; k <= spec.n; ++k) {
    if (law != previous) {
      ChainIncrementLaw inc;
      for (std::size_t y = 0; y < law.size(); ++y) {
        for (std::size_t z = 0; z < law.size(); ++z) {
          const double w = law[y] * tr[y][z];
          if (w == 0.0) continue;
          const double v = f[z] - pf[y];
          inc.values.push_back(v);
          inc.weights.push_back(w);
          inc.sigma2 += w * v * v;
        }
      }
      out.push_back(std::move(inc));
      previous = law;
    }
    law = chain.propagate(law);
  }
  return out;
}

struct SampledStats {
  // Per-(k, column) mean and SE over replicates.
  std::vector<double> mean;
  std::vector<double> se;
  std::size_t columns = 0;
};

// Accumulates column values g(xi_k, column) over sampled paths.
template <class G>
SampledStats sample_increment_stats(const ModelSpec& spec, std::size_t columns,
                                    const McOptions& mc, G&& g) {
  if (mc.replicates < 2) throw DomainError("Monte Carlo needs at least 2 replicates");
  const PathSampler sampler(spec);
  const auto n = static_cast<std::size_t>(spec.n);
  const std::size_t cells = n * columns;
  const std::int64_t blocks = (mc.replicates + kMcBlock - 1) / kMcBlock;
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(blocks));
  std::vector<std::vector<double>> squares(static_cast<std::size_t>(blocks));
  parallel_blocks(mc.replicates, kMcBlock, mc.threads,
                  [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
                    std::vector<double> s(cells, 0.0), s2(cells, 0.0);
                    for (std::int64_t r = begin; r < end; ++r) {
                      const Path path =
                          sampler.path({mc.master_seed, static_cast<std::uint64_t>(r)});
                      for (std::size_t k = 0; k < n; ++k) {
                        for (std::size_t c = 0; c < columns; ++c) {
                          const double v = g(path.xi[k], c);
                          s[k * columns + c] += v;
                          s2[k * columns + c] += v * v;
                        }
                      }
                    }
                    sums[static_cast<std::size_t>(b)] = std::move(s);
                    squares[static_cast<std::size_t>(b)] = std::move(s2);
                  });
  SampledStats out;
  out.columns = columns;
  out.mean.assign(cells, 0.0);
  out.se.assign(cells, 0.0);
  std::vector<double> sq(cells, 0.0);
  for (std::int64_t b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i < cells; ++i) {
      out.mean[i] += sums[static_cast<std::size_t>(b)][i];
      sq[i] += squares[static_cast<std::size_t>(b)][i];
    }
  }
  const double rd = static_cast<double>(mc.replicates);
  for (std::size_t i = 0; i < cells; ++i) {
    out.mean[i] /= rd;
    const double var = std::max(0.0, (sq[i] / rd - out.mean[i] * out.mean[i]) * rd / (rd - 1.0));
    out.se[i] = std::sqrt(var / rd);
  }
  return out;
}

// Mean and SE over sampled paths of a per-path scalar.
template <class G>
Estimate sample_path_mean(const ModelSpec& spec, const McOptions& mc, G&& g) {
  if (mc.replicates < 2) throw DomainError("Monte Carlo needs at least 2 replicates");
  const PathSampler sampler(spec);
  const std::int64_t blocks = (mc.replicates + kMcBlock - 1) / kMcBlock;
  std::vector<std::pair<double, double>> partial(static_cast<std::size_t>(blocks));
  parallel_blocks(mc.replicates, kMcBlock, mc.threads,
                  [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
                    double s = 0.0, s2 = 0.0;
                    for (std::int64_t r = begin; r < end; ++r) {
                      const double v =
                          g(sampler.path({mc.master_seed, static_cast<std::uint64_t>(r)}));
                      s += v;
                      s2 += v * v;
                    }
                    partial[static_cast<std::size_t>(b)] = {s, s2};
                  });
  double s = 0.0, s2 = 0.0;
  for (const auto& [a, b] : partial) {
    s += a;
    s2 += b;
  }
  const double rd = static_cast<double>(mc.replicates);
  const double mean = s / rd;
  const double var = std::max(0.0, (s2 / rd - mean * mean) * rd / (rd - 1.0));
  return {mean, std::sqrt(var / rd), false};
}

// sup_k of column c of stats divided by sigma_k^2, with the SE of the argmax.
Estimate sup_ratio(const SampledStats& stats, const std::vector<double>& sigma2, std::size_t c) {
  Estimate best{-INFINITY, 0.0, false};
  for (std::size_t k = 0; k < sigma2.size(); ++k) {
    const double v = stats.mean[k * stats.columns + c] / sigma2[k];
    if (v > best.value) best = {v, stats.se[k * stats.columns + c] / sigma2[k], false};
  }
  return best;
}

BoundTerm exact_term(std::string name, double value, std::string formula) {
  return {std::move(name), value, std::move(formula), true, 0.0};
}

BoundTerm estimate_term(std::string name, const Estimate& e, double weight,
                        std::string formula) {
  return {std::move(name), weight * e.value, std::move(formula), e.exact, weight * e.se};
}

void finish(BoundBreakdown& b) { b.total = b.recompute_total(); }

}  // namespace

// ---------------------------------------------------------------------------
// Breakdown plumbing

std::string to_string(ConstantsMode mode) {
  return mode == ConstantsMode::explicit_r1 ? "explicit_r1" : "shape_only";
}

ConstantsMode constants_mode_from_string(const std::string& tag) {
  if (tag == "explicit_r1") return ConstantsMode::explicit_r1;
  if (tag == "shape_only") return ConstantsMode::shape_only;
  throw ConfigError("unknown constants mode '" + tag + "'");
}

double BoundBreakdown::recompute_total() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.value;
  return prefactor * (power == 1.0 ? s : std::pow(s, power));
}

std::optional<double> BoundBreakdown::parameter(const std::string& name) const {
  for (const auto& [k, v] : parameters)
    if (k == name) return v;
  return std::nullopt;
}

const BoundTerm* BoundBreakdown::term(const std::string& name) const {
  for (const auto& t : terms)
    if (t.name == name) return &t;
  return nullptr;
}

void write_breakdown_csv_header(std::ostream& out) {
  out << "equation_tag,term_name,value,se,exact_flag,paper_ref\n";
}

void write_breakdown_csv(std::ostream& out, const BoundBreakdown& b) {
  for (const auto& t : b.terms) {
    out << csv_field(b.equation_tag) << ',' << csv_field(t.name) << ','
        << format_double(t.value) << ',' << format_double(t.se) << ','
        << (t.exact ? "exact" : "mc") << ',' << csv_field(t.formula) << '\n';
  }
  for (const auto& [name, value] : b.parameters) {
    out << csv_field(b.equation_tag) << ',' << csv_field(name) << ',' << format_double(value)
        << ",0,param," << csv_field("input") << '\n';
  }
  out << csv_field(b.equation_tag) << ",total," << format_double(b.total) << ",0,total,"
      << csv_field("prefactor " + format_double(b.prefactor) + " * (sum of terms)^" +
                   format_double(b.power) + "; constants " + to_string(b.constants_mode))
      << '\n';
}

void print_breakdown_table(std::ostream& out, const BoundBreakdown& b) {
  std::size_t width = 8;
  for (const auto& t : b.terms) width = std::max(width, t.name.size());
  for (const auto& p : b.parameters) width = std::max(width, p.first.size());
  out << b.equation_tag << "  [" << to_string(b.constants_mode) << "]\n";
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(6);
  for (const auto& t : b.terms) {
    out << "  " << std::left << std::setw(static_cast<int>(width)) << t.name << "  "
        << std::right << std::setw(14) << t.value;
    if (!t.exact) out << " +- " << t.se;
    out << "   " << t.formula << '\n';
  }
  for (const auto& [name, value] : b.parameters) {
    out << "  " << std::left << std::setw(static_cast<int>(width)) << name << "  "
        << std::right << std::setw(14) << value << "   (input)\n";
  }
  out << "  " << std::left << std::setw(static_cast<int>(width)) << "total" << "  "
      << std::right << std::setw(14) << b.total << '\n';
  out.flags(flags);
  out.precision(precision);
}

// ---------------------------------------------------------------------------
// psi_n and moment ratios

double gaussian_psi_kernel(double c) {
  if (c <= 0.0) return 0.0;
  return 4.0 * normal_pdf(0.0) - 4.0 * normal_pdf(c) + 2.0 * c * normal_cdf(-c);
}

bool psi_has_closed_form(const ModelSpec& spec) {
  return spec.family == Family::gaussian_iid || spec.family == Family::rademacher_iid ||
         spec.family == Family::ce_lowerbound ||
         (spec.family == Family::rho_mixing_chain && spec.chain.view == ChainView::martingale);
}

std::function<double(double)> psi_exact(const ModelSpec& spec) {
  spec.validate();
  if (!psi_has_closed_form(spec)) {
    throw CapabilityError("psi_n: no closed form for family " + to_string(spec.family) +
                          "; use the Monte Carlo mode");
  }
  const PathMoments moments = exact_moments(spec);
  const double delta = moments.delta_n;
  switch (spec.family) {
    case Family::gaussian_iid: {
      std::vector<double> sigmas;
      for (double s2 : moments.sigma2) sigmas.push_back(std::sqrt(s2));
      std::sort(sigmas.begin(), sigmas.end());
      sigmas.erase(std::unique(sigmas.begin(), sigmas.end()), sigmas.end());
      return [sigmas, delta](double t) {
        double best = 0.0;
        for (double s : sigmas) best = std::max(best, s * gaussian_psi_kernel(t * delta / s));
        return best;
      };
    }
    case Family::rademacher_iid:
      return [delta](double t) { return std::min(t * delta, delta); };
    case Family::ce_lowerbound: {
      const CEParams params = CEParams::for_n(spec.n, spec.p);
      const double off_branch = 1.0 - ce_branch_probability(params);
      return [params, off_branch](double t) {
        if (t <= 0.0) return 0.0;
        const double g = gaussian_psi_kernel(t);
        const double trailing =
            g * off_branch +
            ce_branch_expectation(params, [t](double v) { return min_h(t, v); });
        return std::max(g, trailing);
      };
    }
    default: {
      auto laws = chain_increment_laws(spec);
      return [laws = std::move(laws), delta](double t) {
        double best = 0.0;
        for (const auto& law : laws) {
          double e = 0.0;
          for (std::size_t i = 0; i < law.values.size(); ++i)
            e += law.weights[i] * min_h(t * delta, law.values[i]);
          best = std::max(best, e / law.sigma2);
        }
        return best;
      };
    }
  }
}

std::vector<Estimate> psi_monte_carlo(const ModelSpec& spec, std::span<const double> ts,
                                      const McOptions& mc) {
  require_martingale(spec, "psi_n");
  for (double t : ts)
    if (!(t >= 0.0)) throw DomainError("psi_n: t must be >= 0");
  const PathMoments moments = exact_moments(spec);
  const double delta = moments.delta_n;
  std::vector<double> scaled(ts.begin(), ts.end());
  for (double& t : scaled) t *= delta;
  const SampledStats stats = sample_increment_stats(
      spec, scaled.size(), mc, [&](double x, std::size_t c) { return min_h(scaled[c], x); });
  std::vector<Estimate> out;
  for (std::size_t c = 0; c < ts.size(); ++c) out.push_back(sup_ratio(stats, moments.sigma2, c));
  return out;
}

Estimate psi_n(double t, const ModelSpec& spec, PsiMode mode, const McOptions& mc) {
  if (!(t >= 0.0)) throw DomainError("psi_n: t must be >= 0");
  require_martingale(spec, "psi_n");
  if (mode == PsiMode::closed_form) return {psi_exact(spec)(t), 0.0, true};
  const double ts[] = {t};
  return psi_monte_carlo(spec, ts, mc).front();
}

namespace {

// Exact per-index E|xi_k|^p paired with sigma_k^2, deduplicated; empty when
// no closed form exists.
std::vector<std::pair<double, double>> exact_abs_moments(const ModelSpec& spec, double p) {
  std::vector<std::pair<double, double>> out;
  switch (spec.family) {
    case Family::gaussian_iid:
      for (double c : spec.coefficients.materialize(spec.n)) {
        out.emplace_back(normal_abs_moment(p) * std::pow(std::fabs(c), p), c * c);
      }
      break;
    case Family::rademacher_iid:
      for (double c : spec.coefficients.materialize(spec.n))
        out.emplace_back(std::pow(std::fabs(c), p), c * c);
      break;
    case Family::ce_lowerbound: {
      const CEParams params = CEParams::for_n(spec.n, spec.p);
      out.emplace_back(normal_abs_moment(p), 1.0);
      out.emplace_back(ce_trailing_abs_moment(params, p), 1.0);
      break;
    }
    case Family::rho_mixing_chain:
      if (spec.chain.view == ChainView::martingale) {
        for (const auto& law : chain_increment_laws(spec)) {
          double e = 0.0;
          for (std::size_t i = 0; i < law.values.size(); ++i)
            e += law.weights[i] * std::pow(std::fabs(law.values[i]), p);
          out.emplace_back(e, law.sigma2);
        }
      }
      break;
    default: break;
  }
  return out;
}

}  // namespace

Estimate moment_ratio(const ModelSpec& spec, double p, const McOptions& mc) {
  if (!(p > 0.0)) throw DomainError("moment_ratio: p must be > 0");
  const auto exact = exact_abs_moments(spec, p);
  if (!exact.empty()) {
    double best = 0.0;
    for (const auto& [m, s2] : exact) best = std::max(best, m / s2);
    return {best, 0.0, true};
  }
  const PathMoments moments = exact_moments(spec);
  const SampledStats stats = sample_increment_stats(
      spec, 1, mc, [p](double x, std::size_t) { return std::pow(std::fabs(x), p); });
  return sup_ratio(stats, moments.sigma2, 0);
}

Estimate abs_moment_sum(const ModelSpec& spec, double p, const McOptions& mc) {
  if (spec.family == Family::ce_lowerbound) {
    const CEParams params = CEParams::for_n(spec.n, spec.p);
    return {static_cast<double>(params.m) * normal_abs_moment(p) +
                static_cast<double>(params.k) * ce_trailing_abs_moment(params, p),
            0.0, true};
  }
  if (spec.family == Family::rho_mixing_chain && spec.chain.view == ChainView::martingale) {
    const FiniteChain chain = spec.chain.build();
    double s = 0.0;
    for (std::int64_t k = 1; k <= spec.n; ++k) s += chain.martingale_abs_moment(k, p);
    return {s, 0.0, true};
  }
  const auto exact = exact_abs_moments(spec, p);
  if (!exact.empty()) {
    double s = 0.0;
    for (const auto& e : exact) s += e.first;
    return {s, 0.0, true};
  }
  return sample_path_mean(spec, mc, [p](const Path& path) {
    double acc = 0.0;
    for (double x : path.xi) acc += std::pow(std::fabs(x), p);
    return acc;
  });
}

// ---------------------------------------------------------------------------
// U and L

UProfile u_profile(const ModelSpec& spec, double p, const McOptions& mc, bool prefer_exact) {
  const auto oracle = ConditionalOracle::for_model(spec);
  if (!oracle) {
    throw CapabilityError("U_{l,n}: family " + to_string(spec.family) +
                          " has no conditional oracle; use shape-only bounds");
  }
  const auto n = spec.n;
  const std::size_t count = n >= 2 ? static_cast<std::size_t>(n - 1) : 0;
  UProfile out;
  out.value.assign(count, 0.0);
  out.se.assign(count, 0.0);
  if (oracle->constant()) return out;

  if (prefer_exact && spec.family == Family::rho_mixing_chain) {
    out.value = spec.chain.build().u_exact(n, p);
  } else {
    if (mc.replicates < 2) throw DomainError("U_{l,n}: need at least 2 replicates");
    const PathMoments moments = exact_moments(spec);
    const PathSampler sampler(spec);
    const std::int64_t blocks = (mc.replicates + kMcBlock - 1) / kMcBlock;
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(blocks));
    std::vector<std::vector<double>> squares(static_cast<std::size_t>(blocks));
    parallel_blocks(mc.replicates, kMcBlock, mc.threads,
                    [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
                      std::vector<double> s(count, 0.0), s2(count, 0.0);
                      for (std::int64_t r = begin; r < end; ++r) {
                        const Path path =
                            sampler.path({mc.master_seed, static_cast<std::uint64_t>(r)});
                        for (std::int64_t ell = 2; ell <= n; ++ell) {
                          const auto prev = static_cast<std::size_t>(ell - 2);
                          const double scale = std::pow(
                              std::max(std::fabs(path.xi[prev]), std::sqrt(moments.sigma2[prev])),
                              p - 2.0);
                          const double v =
                              scale * std::fabs(oracle->tail(path, ell) - oracle->tail_mean(ell));
                          s[prev] += v;
                          s2[prev] += v * v;
                        }
                      }
                      sums[static_cast<std::size_t>(b)] = std::move(s);
                      squares[static_cast<std::size_t>(b)] = std::move(s2);
                    });
    std::vector<double> sq(count, 0.0);
    for (std::int64_t b = 0; b < blocks; ++b) {
      for (std::size_t i = 0; i < count; ++i) {
        out.value[i] += sums[static_cast<std::size_t>(b)][i];
        sq[i] += squares[static_cast<std::size_t>(b)][i];
      }
    }
    const double rd = static_cast<double>(mc.replicates);
    for (std::size_t i = 0; i < count; ++i) {
      out.value[i] /= rd;
      const double var =
          std::max(0.0, (sq[i] / rd - out.value[i] * out.value[i]) * rd / (rd - 1.0));
      out.se[i] = std::sqrt(var / rd);
    }
    out.exact = false;
  }
  out.all_zero = std::all_of(out.value.begin(), out.value.end(),
                             [](double v) { return std::fabs(v) <= 1e-14; });
  return out;
}

Estimate u_ln(std::int64_t ell, double p, const ModelSpec& spec, const McOptions& mc) {
  if (ell < 2 || ell > spec.n) throw DomainError("u_ln: l must lie in [2, n]");
  const UProfile u = u_profile(spec, p, mc, false);
  const auto i = static_cast<std::size_t>(ell - 2);
  return {u.value[i], u.se[i], u.exact};
}

Estimate l_n(double p, double r, double a, const PathMoments& moments, const UProfile& u) {
  require_p(p);
  if (!(r > 0.0 && r <= p)) throw DomainError("L_n: r must lie in (0, p]");
  if (!(a >= 1.0)) throw DomainError("L_n: a must be >= 1");
  if (u.all_zero) return {0.0, 0.0, u.exact};
  const std::size_t n = moments.sigma2.size();
  const double floor = a * a * moments.delta_n * moments.delta_n;
  Estimate out{0.0, 0.0, u.exact};
  double suffix = 0.0;  // V_n - V_{l-1}
  for (std::size_t ell = n; ell >= 2; --ell) {
    suffix += moments.sigma2[ell - 1];
    const double den = std::pow(suffix + floor, (p - r) / 2.0);
    out.value += u.value[ell - 2] / den;
    out.se += u.se[ell - 2] / den;
  }
  return out;
}

Estimate l_n(double p, double r, double a, const ModelSpec& spec, const McOptions& mc) {
  return l_n(p, r, a, exact_moments(spec), u_profile(spec, p, mc, true));
}

double vn_of_a(double a, const PathMoments& moments) {
  if (!(a >= 1.0)) throw DomainError("v_n(a): a must be >= 1");
  const double alpha = (1.0 + a * a) / (a * a);
  return a * a * moments.delta_n * moments.delta_n + alpha * moments.v_n;
}

// ---------------------------------------------------------------------------
// Theorem-level bounds

double log_grid_trapezoid(const std::function<double(double)>& f, double lo, double hi,
                          int points, double* error) {
  if (!(lo > 0.0) || !(hi >= lo)) throw DomainError("log-grid trapezoid needs 0 < lo <= hi");
  if (points < 3) throw DomainError("log-grid trapezoid needs at least 3 points");
  auto rule = [&](int nodes) {
    const double ulo = std::log(lo);
    const double h = (std::log(hi) - ulo) / (nodes - 1);
    if (h == 0.0) return 0.0;
    double s = 0.0;
    for (int i = 0; i < nodes; ++i) {
      const double x = i == nodes - 1 ? hi : std::exp(ulo + i * h);
      const double w = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
      s += w * f(x) * x;
    }
    return s * h;
  };
  const double fine = rule(points);
  if (error) *error = std::fabs(fine - rule((points + 1) / 2)) / 3.0;
  return fine;
}

BoundBreakdown theorem1_rhs(double r, double p, double a, const ModelSpec& spec,
                            const Theorem1Options& options) {
  require_p(p);
  if (!(r > 0.0 && r <= p)) throw DomainError("theorem1: r must lie in (0, p]");
  if (!(a >= 1.0)) throw DomainError("theorem1: a must be >= 1");
  if (options.mode == ConstantsMode::explicit_r1 && r != 1.0) {
    throw DomainError("theorem1: explicit constants are only available for r = 1");
  }
  require_martingale(spec, "theorem1");
  const double kappa = options.mode == ConstantsMode::explicit_r1 ? 6.0 : options.kappa;
  const PathMoments moments = exact_moments(spec);
  const double delta = moments.delta_n;
  const double v = vn_of_a(a, moments);
  const double upper = std::sqrt(v) / delta;

  // Weights of the drift, psi and L terms. The explicit r = 1 values follow
  // from kappa = 6, c3 = 1, c4 = 8/5; the L weight keeps only the factor 2
  // of the smoothing step since its inner constant is not given.
  double w_drift = 1.0, w_psi = 1.0, w_l = 1.0;
  if (options.mode == ConstantsMode::explicit_r1) {
    w_drift = 36.0 * std::sqrt(3.0) / 5.0;
    w_psi = 2.0 / 3.0;
    w_l = 2.0;
  }

  BoundBreakdown b;
  b.equation_tag = "theorem1";
  b.constants_mode = options.mode;

  const double drift_integral = std::fabs(r - 2.0) < 1e-15
                                    ? std::log(upper / a)
                                    : (std::pow(upper, r - 2.0) - std::pow(a, r - 2.0)) / (r - 2.0);
  b.terms.push_back(exact_term("drift_integral", w_drift * std::pow(delta, r) * drift_integral,
                               "delta_n^r int_a^sqrt(v_n(a))/delta_n x^(r-3) dx"));

  double quad_error = 0.0;
  Estimate psi_int{0.0, 0.0, true};
  if (options.psi == PsiMode::closed_form) {
    const auto psi = psi_exact(spec);
    psi_int.value = log_grid_trapezoid(
        [&](double x) { return psi(kappa * x) * std::pow(x, r - 2.0); }, a, upper,
        options.grid_points, &quad_error);
  } else {
    // Same grid as the trapezoid rule, psi estimated once per node.
    const int nodes = options.grid_points;
    const double ulo = std::log(a);
    const double h = (std::log(upper) - ulo) / (nodes - 1);
    std::vector<double> xs(static_cast<std::size_t>(nodes)), ts(xs.size());
    for (int i = 0; i < nodes; ++i) {
      xs[static_cast<std::size_t>(i)] = i == nodes - 1 ? upper : std::exp(ulo + i * h);
      ts[static_cast<std::size_t>(i)] = kappa * xs[static_cast<std::size_t>(i)];
    }
    const auto est = psi_monte_carlo(spec, ts, options.mc);
    psi_int.exact = false;
    for (int i = 0; i < nodes; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double w = ((i == 0 || i == nodes - 1) ? 0.5 : 1.0) * h *
                       std::pow(xs[k], r - 1.0);
      psi_int.value += w * est[k].value;
      psi_int.se += w * est[k].se;
    }
  }
  b.terms.push_back(estimate_term("psi_integral", psi_int, w_psi * std::pow(delta, r - 1.0),
                                  "delta_n^(r-1) int_a^sqrt(v_n(a))/delta_n psi_n(kappa x) "
                                  "x^(r-2) dx"));

  const Estimate l = l_n(p, r, a, moments, u_profile(spec, p, options.mc, options.prefer_exact_u));
  b.terms.push_back(estimate_term("L_n", l, w_l,
                                  "sum_l U_{l,n}(p) / (V_n - V_{l-1} + a^2 delta_n^2)^((p-r)/2)"));
  b.terms.push_back(exact_term("smoothing", kFourSqrt2 * std::pow(a * delta, r),
                               "4 sqrt(2) a^r delta_n^r"));

  b.parameters = {{"a", a},           {"r", r},         {"p", p},
                  {"kappa", kappa},   {"delta_n", delta}, {"V_n", moments.v_n},
                  {"v_n(a)", v},      {"psi_quadrature_error", w_psi * quad_error}};
  finish(b);
  return b;
}

BoundBreakdown theorem1_auto_a(double r, double p, const ModelSpec& spec,
                               const Theorem1Options& options) {
  const PathMoments moments = exact_moments(spec);
  const double limit = std::sqrt(moments.v_n) / moments.delta_n;
  std::optional<BoundBreakdown> best;
  for (double a = 1.0; a == 1.0 || a <= limit; a *= 2.0) {
    BoundBreakdown b = theorem1_rhs(r, p, a, spec, options);
    if (!best || b.total < best->total) best = std::move(b);
  }
  best->parameters.emplace_back("auto_a", 1.0);
  return *best;
}

BoundBreakdown corollary_w1_bound(double p, double r, double a, const ModelSpec& spec,
                                  const McOptions& mc) {
  require_p(p);
  if (!(r > 0.0 && r <= 1.0)) throw DomainError("corollary_w1: r must lie in (0, 1]");
  require_martingale(spec, "corollary_w1");
  const PathMoments moments = exact_moments(spec);
  const double delta = moments.delta_n;
  const double v = vn_of_a(a, moments);
  const Estimate ratio = moment_ratio(spec, p, mc);

  BoundBreakdown b;
  b.equation_tag = "corollary_w1";
  b.terms.push_back(exact_term("smoothing", kFourSqrt2 * std::pow(a * delta, r),
                               "4 sqrt(2) (a delta_n)^r"));
  if (p == 3.0 && r == 1.0) {
    const double factor = std::log(std::sqrt(v) / delta);
    b.terms.push_back(estimate_term("moment_log", ratio, factor,
                                    "sup_k E|xi_k|^3 / sigma_k^2 * log(sqrt(v_n(a)) / delta_n)"));
  } else {
    const double factor = std::pow(v, (2.0 + r - p) / 2.0);
    b.terms.push_back(estimate_term("moment_power", ratio, factor,
                                    "sup_k E|xi_k|^p / sigma_k^2 * v_n(a)^((2+r-p)/2)"));
  }
  b.terms.push_back(estimate_term("L_n", l_n(p, r, a, moments, u_profile(spec, p, mc, true)), 1.0,
                                  "L_n(p, r, a delta_n)"));
  b.parameters = {{"a", a},           {"r", r},         {"p", p},
                  {"delta_n", delta}, {"V_n", moments.v_n}, {"v_n(a)", v},
                  {"moment_ratio", ratio.value}};
  finish(b);
  return b;
}

double berry_esseen_exponent(double p) {
  require_p(p);
  return p == 3.0 ? -0.25 : -(p - 2.0) / (2.0 * (p - 1.0));
}

BoundBreakdown berry_esseen_bound(double p, const ModelSpec& spec, const McOptions& mc) {
  require_p(p);
  require_martingale(spec, "berry_esseen");
  const PathMoments moments = exact_moments(spec);
  const double delta = moments.delta_n;
  const Estimate ratio = moment_ratio(spec, p, mc);
  const UProfile u = u_profile(spec, p, mc, true);

  BoundBreakdown b;
  b.equation_tag = "berry_esseen";
  b.target_exponent = berry_esseen_exponent(p);
  b.prefactor = std::pow(moments.v_n, *b.target_exponent);
  if (p == 3.0) {
    b.power = 0.5;
    const double v1 = vn_of_a(1.0, moments);
    b.terms.push_back(estimate_term("moment_log", ratio, std::log(std::sqrt(v1) / delta),
                                    "sup_k E|xi_k|^3 / sigma_k^2 * log(sqrt(v_n(1)) / delta_n)"));
    b.terms.push_back(estimate_term("L_n", l_n(3.0, 1.0, 1.0, moments, u), 1.0,
                                    "L_n(3, 1, delta_n)"));
    b.parameters.emplace_back("v_n(1)", v1);
  } else {
    b.power = 1.0 / (p - 1.0);
    b.terms.push_back(estimate_term("moment_ratio", ratio, 1.0, "sup_k E|xi_k|^p / sigma_k^2"));
    b.terms.push_back(estimate_term("L_n", l_n(p, p - 2.0, 1.0, moments, u), 1.0,
                                    "L_n(p, p-2, delta_n)"));
  }
  b.parameters.emplace_back("p", p);
  b.parameters.emplace_back("delta_n", delta);
  b.parameters.emplace_back("V_n", moments.v_n);
  b.parameters.emplace_back("target_exponent", *b.target_exponent);
  finish(b);
  return b;
}

BoundBreakdown heyde_brown_bound(double p, const ModelSpec& spec, const McOptions& mc) {
  require_p(p, 4.0);
  require_martingale(spec, "heyde_brown");
  const PathMoments moments = exact_moments(spec);
  const double vn = moments.v_n;

  Estimate deviation{0.0, 0.0, true};
  if (!moments.conditional_variance_constant) {
    if (spec.family != Family::rho_mixing_chain) {
      throw CapabilityError("heyde_brown: no conditional variance oracle for this model");
    }
    // <M>_n = sum_k w(Y_{k-1}) sampled over chain paths.
    const FiniteChain chain = spec.chain.build();
    const auto w = chain.conditional_variance();
    deviation = sample_path_mean(spec, mc, [&](const Path& path) {
      double bracket = 0.0;
      for (std::int64_t k = 1; k <= spec.n; ++k)
        bracket += w[static_cast<std::size_t>(path.states[static_cast<std::size_t>(k - 1)])];
      return std::pow(std::fabs(bracket / vn - 1.0), p / 2.0);
    });
  }
  const Estimate moment_sum = abs_moment_sum(spec, p, mc);

  BoundBreakdown b;
  b.equation_tag = "heyde_brown";
  b.power = 1.0 / (p + 1.0);
  b.terms.push_back(estimate_term("conditional_variance_deviation", deviation, 1.0,
                                  "||<M>_n / V_n - 1||_{p/2}^{p/2}"));
  b.terms.push_back(estimate_term("moment_sum", moment_sum, std::pow(vn, -p / 2.0),
                                  "V_n^(-p/2) sum_k E|xi_k|^p"));
  b.parameters = {{"p", p}, {"V_n", vn}};
  if (moments.conditional_variance_constant) {
    b.target_exponent = -(p - 2.0) / (2.0 * (p + 1.0));
    b.parameters.emplace_back("target_exponent", *b.target_exponent);
  }
  finish(b);
  return b;
}

// ---------------------------------------------------------------------------
// Linear statistics

double bnp(std::int64_t n, double p, std::span<const double> alphas,
           std::span<const double> lambda_seq, std::span<const double> eta_seq) {
  require_p(p);
  if (alphas.empty()) throw DomainError("B(n,p): empty coefficient list");
  if (n < 1 || alphas.size() < static_cast<std::size_t>(n)) {
    throw DomainError("B(n,p): need n >= 1 coefficients");
  }
  if (lambda_seq.size() < static_cast<std::size_t>(n) ||
      eta_seq.size() < static_cast<std::size_t>(n) + 1) {
    throw DomainError("B(n,p): lambda needs n entries and eta needs n + 1");
  }
  double m = 0.0, sq = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double a = alphas[static_cast<std::size_t>(i)];
    m = std::max(m, std::fabs(a));
    sq += a * a;
  }
  double big_lambda = 0.0;
  for (std::int64_t i = 1; i <= n; ++i)
    big_lambda += static_cast<double>(i) * lambda_seq[static_cast<std::size_t>(i - 1)];
  double eta = 0.0;
  for (std::int64_t i = 0; i <= n; ++i) eta += eta_seq[static_cast<std::size_t>(i)];
  if (p == 3.0) return m * eta * (big_lambda + eta * eta) * std::log(sq / m);
  return std::pow(m, p - 2.0) * std::pow(eta, p - 2.0) * (big_lambda + eta * eta) *
         std::pow(sq, (3.0 - p) / 2.0);
}

double gaussian_cp(double p) { return std::pow(normal_abs_moment(p), 2.0 / p); }

double gaussian_dp(double p) {
  const double s = p / 2.0;
  auto g = [s](double z) { return std::pow(std::fabs(z * z - 1.0), s) * normal_pdf(z); };
  const double m = 2.0 * (integrate(g, 0.0, 1.0) + integrate(g, 1.0, 40.0));
  return std::pow(m, 2.0 / p);
}

double bivariate_product_abs_moment(double var_x, double var_y, double cov, double shift,
                                    double s) {
  if (!(var_x >= 0.0 && var_y >= 0.0)) throw DomainError("variances must be >= 0");
  const double sx = std::sqrt(var_x);
  const double sy = std::sqrt(var_y);
  if (sx == 0.0 || sy == 0.0) return std::pow(std::fabs(shift), s);
  const double rho = std::clamp(cov / (sx * sy), -1.0, 1.0);
  const double tau = sy * std::sqrt(std::max(0.0, 1.0 - rho * rho));
  static constexpr double kRange = 12.0;
  // E|A + B Z|^s, splitting at the kink.
  auto inner = [s](double a, double b) {
    if (std::fabs(b) < 1e-300) return std::pow(std::fabs(a), s);
    auto g = [&](double z) { return std::pow(std::fabs(a + b * z), s) * normal_pdf(z); };
    const double kink = std::clamp(-a / b, -kRange, kRange);
    return integrate(g, -kRange, kink, 1e-11) + integrate(g, kink, kRange, 1e-11);
  };
  auto outer = [&](double z1) {
    const double a = sx * rho * sy * z1 * z1 - shift;
    const double b = sx * tau * z1;
    return inner(a, b) * normal_pdf(z1);
  };
  return integrate(outer, -kRange, 0.0, 1e-10) + integrate(outer, 0.0, kRange, 1e-10);
}

LinearDependence linear_dependence(const LinearBase& base, std::int64_t n, double p) {
  require_p(p);
  if (n < 1) throw DomainError("linear_dependence: n must be >= 1");
  LinearDependence dep;
  const auto count = static_cast<std::size_t>(n);
  dep.lambda.assign(count, 0.0);
  dep.eta_p.assign(count + 1, 0.0);
  dep.eta_2.assign(count + 1, 0.0);
  const double zp = std::pow(normal_abs_moment(p), 1.0 / p);
  if (base.kind == LinearBase::Kind::ar1) {
    const double g0 = base.autocovariance(0);
    const double phi = std::fabs(base.phi);
    const double cp = gaussian_cp(p);
    const double dp = gaussian_dp(p);
    for (std::size_t k = 1; k <= count; ++k) {
      const double pk = std::pow(phi, static_cast<double>(k));
      dep.lambda[k - 1] = g0 * std::max(pk * cp, pk * pk * dp);
    }
    for (std::size_t i = 0; i <= count; ++i) {
      const double pi = std::pow(phi, static_cast<double>(i));
      dep.eta_2[i] = pi * std::sqrt(g0);
      dep.eta_p[i] = dep.eta_2[i] * zp;
    }
    return dep;
  }
  // MA(q) with G_0 generated by the innovations up to time 0. The part of
  // Y_i measurable w.r.t. G_0 is A_i = sum_{j >= i} theta_j e_{i-j}.
  const auto& theta = base.ma_coeffs;
  const std::size_t q = theta.size() - 1;
  auto cov_a = [&](std::size_t i, std::size_t j) {  // Cov(A_i, A_j), i, j >= 0
    double c = 0.0;
    for (std::size_t l = 0; i + l <= q && j + l <= q; ++l) c += theta[i + l] * theta[j + l];
    return c;
  };
  const double s = p / 2.0;
  const double norm_power = 2.0 / p;
  // ||A_i A_j - E A_i A_j||_{p/2} for 1 <= i <= j <= q.
  std::vector<std::vector<double>> centered(q + 2, std::vector<double>(q + 2, 0.0));
  for (std::size_t i = 1; i <= q; ++i) {
    for (std::size_t j = i; j <= q; ++j) {
      const double c = cov_a(i, j);
      centered[i][j] = std::pow(
          bivariate_product_abs_moment(cov_a(i, i), cov_a(j, j), c, c, s), norm_power);
    }
  }
  for (std::size_t k = 1; k <= count; ++k) {
    if (k > q) break;
    const double first = std::pow(
        bivariate_product_abs_moment(cov_a(0, 0), cov_a(k, k), cov_a(0, k), 0.0, s), norm_power);
    double second = 0.0;
    for (std::size_t i = k; i <= q; ++i)
      for (std::size_t j = i; j <= q; ++j) second = std::max(second, centered[i][j]);
    dep.lambda[k - 1] = std::max(first, second);
  }
  for (std::size_t i = 0; i <= count && i <= q; ++i) {
    dep.eta_2[i] = std::sqrt(cov_a(i, i));
    dep.eta_p[i] = dep.eta_2[i] * zp;
  }
  return dep;
}

BoundBreakdown linear_bound(double p, const ModelSpec& spec, bool spectral_floor) {
  require_p(p);
  if (spec.family != Family::linear_statistic) {
    throw DomainError("linear_bnp: the model must be a linear statistic");
  }
  spec.validate();
  const auto alphas = spec.coefficients.materialize(spec.n);
  const LinearDependence dep = linear_dependence(spec.base, spec.n, p);
  double m = 0.0, sq = 0.0;
  for (double a : alphas) {
    m = std::max(m, std::fabs(a));
    sq += a * a;
  }
  double eta2_sum = 0.0;
  for (double e : dep.eta_2) eta2_sum += e;

  BoundBreakdown b;
  b.equation_tag = "linear_bnp";
  b.terms.push_back(exact_term("projection", m * eta2_sum, "m_n sum_k ||E(Y_k | G_0)||_2"));
  // Split B(n,p) into its Lambda_n and eta_n^2 parts.
  const std::vector<double> zero_lambda(dep.lambda.size(), 0.0);
  const double eta_part = bnp(spec.n, p, alphas, zero_lambda, dep.eta_p);
  const double full = bnp(spec.n, p, alphas, dep.lambda, dep.eta_p);
  b.terms.push_back(exact_term("B_lambda", full - eta_part,
                               p == 3.0 ? "m_n eta_n Lambda_n log(sum alpha^2 / m_n)"
                                        : "m_n^(p-2) eta_n^(p-2) Lambda_n (sum alpha^2)^((3-p)/2)"));
  b.terms.push_back(exact_term("B_eta", eta_part,
                               p == 3.0 ? "m_n eta_n^3 log(sum alpha^2 / m_n)"
                                        : "m_n^(p-2) eta_n^p (sum alpha^2)^((3-p)/2)"));
  if (!spectral_floor) {
    double d = alphas.front() * alphas.front() + alphas.back() * alphas.back();
    for (std::size_t k = 1; k < alphas.size(); ++k)
      d += (alphas[k] - alphas[k - 1]) * (alphas[k] - alphas[k - 1]);
    b.terms.push_back(exact_term("coefficient_variation", std::sqrt(d),
                                 "(sum_{k=1}^{n+1} (alpha_k - alpha_{k-1})^2)^(1/2)"));
  }
  double big_lambda = 0.0, eta = 0.0;
  for (std::size_t i = 0; i < dep.lambda.size(); ++i)
    big_lambda += static_cast<double>(i + 1) * dep.lambda[i];
  for (double e : dep.eta_p) eta += e;
  b.parameters = {{"p", p},
                  {"m_n", m},
                  {"sum_alpha_sq", sq},
                  {"Lambda_n", big_lambda},
                  {"eta_n", eta},
                  {"V_n", linear_exact_variance(spec.base, alphas)},
                  {"sigma2_long_run", spec.base.long_run_variance()}};
  finish(b);
  return b;
}

// ---------------------------------------------------------------------------
// Chains and sequential maps

double rho_mixing_bound(double k_n, double c_n, double v_n) {
  return k_n * (1.0 + c_n * std::log(1.0 + c_n * v_n));
}

BoundBreakdown rho_mixing_breakdown(const ModelSpec& spec) {
  if (spec.family != Family::rho_mixing_chain) {
    throw DomainError("rho_mixing: the model must be a chain");
  }
  spec.validate();
  const FiniteChain chain = spec.chain.build();
  const double rho = chain.rho1();
  const double c_bound = (1.0 + rho) / (1.0 - rho);
  const double k = chain.k_n();
  const double v = chain.exact_variance(spec.n);
  BoundBreakdown b;
  b.equation_tag = "rho_mixing";
  b.terms.push_back(exact_term("K_n", k, "K_n = max_i ||X_i||_inf"));
  b.terms.push_back(exact_term("K_n C_n log(1 + C_n V_n)", k * c_bound * std::log(1.0 + c_bound * v),
                               "C_n = (1 + rho_1) / (1 - rho_1)"));
  b.parameters = {{"rho_1", rho}, {"C_n_bound", c_bound}, {"C_n", chain.c_n(spec.n)},
                  {"V_n", v}};
  finish(b);
  return b;
}

double seqdyn_bound(std::int64_t n, double v_n) {
  if (n < 1) throw DomainError("seqdyn: n must be >= 1");
  if (!(v_n >= 0.0)) throw DomainError("seqdyn: V_n must be >= 0");
  return std::log(static_cast<double>(n) + 1.0) * std::log(2.0 + v_n);
}

BoundBreakdown seqdyn_breakdown(const ModelSpec& spec) {
  if (spec.family != Family::sequential_maps) {
    throw DomainError("sequential: the model must be a sequential map system");
  }
  spec.validate();
  const double v = sequential_exact_variance(spec.sequential, spec.n);
  BoundBreakdown b;
  b.equation_tag = "sequential";
  b.terms.push_back(exact_term("log(n+1) log(2+V_n)", seqdyn_bound(spec.n, v),
                               "log(n + 1) log(2 + V_n)"));
  b.parameters = {{"V_n", v}};
  finish(b);
  return b;
}

const std::vector<std::string>& known_bound_tags() {
  static const std::vector<std::string> tags = {"theorem1",    "corollary_w1", "berry_esseen",
                                                "heyde_brown", "linear_bnp",   "rho_mixing",
                                                "sequential"};
  return tags;
}

BoundBreakdown evaluate_bound(const BoundRequest& request, const ModelSpec& spec) {
  const std::string& tag = request.tag;
  if (tag == "theorem1") {
    return request.a ? theorem1_rhs(request.r, request.p, *request.a, spec, request.theorem1)
                     : theorem1_auto_a(request.r, request.p, spec, request.theorem1);
  }
  if (tag == "corollary_w1") {
    return corollary_w1_bound(request.p, std::min(request.r, 1.0), request.a.value_or(1.0), spec,
                              request.theorem1.mc);
  }
  if (tag == "berry_esseen") return berry_esseen_bound(request.p, spec, request.theorem1.mc);
  if (tag == "heyde_brown") return heyde_brown_bound(request.p, spec, request.theorem1.mc);
  if (tag == "linear_bnp") return linear_bound(request.p, spec, request.spectral_floor);
  if (tag == "rho_mixing") return rho_mixing_breakdown(spec);
  if (tag == "sequential") return seqdyn_breakdown(spec);
  throw ConfigError("unknown bound tag '" + tag + "'");
}

}  // namespace cltlab
