// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "cltlab/models.hpp"
#include "cltlab/numerics.hpp"
#include "doctest.h"

using namespace cltlab;

namespace {

ModelSpec make(Family family, std::int64_t n, double p = 3.0) {
  ModelSpec s;
  s.family = family;
  s.n = n;
  s.p = p;
  return s;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  const double r = static_cast<double>(v.size());
  double m = std::accumulate(v.begin(), v.end(), 0.0) / r;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (r - 1.0) / r)};
}

// E (sum_k phi(M_k x mod 1))^2 over x uniform, by the rectangle rule on a grid
// fine enough to integrate the trigonometric polynomial exactly.
double sequential_variance_by_grid(const SequentialParams& params, std::int64_t n) {
  std::vector<double> freq;
  double m = 1.0;
  for (std::int64_t k = 1; k <= n; ++k) {
    m *= params.m_at(k);
    freq.push_back(m);
  }
  const int points = static_cast<int>(8 * freq.back()) + 16;
  const double two_pi = 2.0 * std::acos(-1.0);
  double total = 0.0;
  for (int i = 0; i < points; ++i) {
    const double x = (i + 0.5) / points;
    double s = 0.0;
    for (double f : freq) {
      const double y = std::fmod(f * x, 1.0);
      s += params.observable == Observable::cos1
               ? kSqrt2 * std::cos(two_pi * y)
               : std::cos(two_pi * y) + 0.5 * std::cos(2.0 * two_pi * y);
    }
    total += s * s;
  }
  return total / points;
}

}  // namespace

TEST_CASE("tags round-trip") {
  for (auto f : {Family::gaussian_iid, Family::rademacher_iid, Family::ce_lowerbound,
                 Family::linear_statistic, Family::rho_mixing_chain, Family::sequential_maps}) {
    CHECK(family_from_string(to_string(f)) == f);
  }
  CHECK(observable_from_string(to_string(Observable::cos12)) == Observable::cos12);
  CHECK_THROWS_AS(family_from_string("bogus"), ConfigError);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_WITH_AS(make(Family::ce_lowerbound, 19).validate(), doctest::Contains("n >= 20"),
                       ConfigError);
  CHECK_NOTHROW(make(Family::ce_lowerbound, 20, 4.0).validate());
  CHECK_THROWS_AS(make(Family::gaussian_iid, 0).validate(), ConfigError);
  CHECK_THROWS_AS(make(Family::gaussian_iid, 10, 3.5).validate(), ConfigError);
  CHECK_THROWS_AS(make(Family::gaussian_iid, 10, 2.0).validate(), ConfigError);
  auto lin = make(Family::linear_statistic, 10);
  lin.base.phi = 1.0;
  CHECK_THROWS_AS(lin.validate(), ConfigError);
  auto seq = make(Family::sequential_maps, 10);
  seq.sequential.schedule = {2, 1};
  CHECK_THROWS_WITH_AS(seq.validate(), doctest::Contains("expansion"), ConfigError);
  auto chain = make(Family::rho_mixing_chain, 10);
  chain.chain.f = {1.0, 0.0};
  CHECK_THROWS_AS(chain.validate(), ConfigError);
  auto reducible = make(Family::rho_mixing_chain, 10);
  reducible.chain.transition = {{1.0, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(reducible.validate(), ConfigError);
  auto neg = make(Family::gaussian_iid, 10);
  neg.coefficients.kappa = 0.0;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
  CHECK_THROWS_AS(sample_path(make(Family::ce_lowerbound, 10), {1, 0}), ConfigError);
}

TEST_CASE("sample_path is a deterministic function of spec and lineage") {
  for (auto f : {Family::gaussian_iid, Family::rademacher_iid, Family::ce_lowerbound,
                 Family::linear_statistic, Family::rho_mixing_chain, Family::sequential_maps}) {
    const auto spec = make(f, f == Family::ce_lowerbound ? 40 : 12);
    const Path a = sample_path(spec, {99, 4});
    const Path b = sample_path(spec, {99, 4});
    const Path c = sample_path(spec, {99, 5});
    CHECK(a.xi == b.xi);
    CHECK(a.xi != c.xi);
    CHECK(a.xi.size() == static_cast<std::size_t>(spec.n));
    for (double x : a.xi) CHECK(std::isfinite(x));
    CHECK(sample_sum(spec, {99, 4}) == sample_sum(spec, {99, 4}));
  }
}

TEST_CASE("gaussian_iid unit variance") {
  const auto spec = make(Family::gaussian_iid, 3);
  const PathSampler sampler(spec);
  double sq = 0.0;
  const int reps = 100000;
  for (int r = 0; r < reps; ++r) {
    for (double x : sampler.path({1, static_cast<std::uint64_t>(r)}).xi) sq += x * x;
  }
  CHECK(std::fabs(sq / (3.0 * reps) - 1.0) <= 0.02);
}

TEST_CASE("sum shortcuts agree in law with summed paths") {
  struct Case {
    Family family;
    std::int64_t n;
  };
  for (const Case c : {Case{Family::gaussian_iid, 16}, Case{Family::rademacher_iid, 16},
                       Case{Family::ce_lowerbound, 40}}) {
    auto spec = make(c.family, c.n);
    if (c.family == Family::gaussian_iid) {
      spec.coefficients.kind = CoefficientRule::Kind::ramp;
    }
    const PathSampler sampler(spec);
    std::vector<double> fast, slow;
    int fast_zero = 0, slow_zero = 0;
    for (int r = 0; r < 40000; ++r) {
      const double a = sampler.sum({5, static_cast<std::uint64_t>(r)});
      const Path p = sampler.path({6, static_cast<std::uint64_t>(r)});
      fast.push_back(a * a);
      slow.push_back(p.sum * p.sum);
      fast_zero += a == 0.0;
      slow_zero += p.sum == 0.0;
    }
    const auto f = mean_se(fast), s = mean_se(slow);
    CHECK(std::fabs(f.mean - s.mean) <= 4.0 * std::hypot(f.se, s.se));
    const double pz = (fast_zero + slow_zero) / 80000.0;
    CHECK(std::fabs(fast_zero - slow_zero) / 40000.0 <=
          4.0 * std::sqrt(2.0 * pz * (1.0 - pz) / 40000.0) + 1e-12);
  }
  // Rademacher sums are integers; the popcount route must reproduce the path.
  const auto rad = make(Family::rademacher_iid, 100);
  for (std::uint64_t r = 0; r < 50; ++r) {
    CHECK(sample_sum(rad, {8, r}) == sample_path(rad, {8, r}).sum);
  }
}

TEST_CASE("CEParams") {
  const CEParams p = CEParams::for_n(100, 3.0);
  CHECK(p.a == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
  CHECK(p.k == 20);
  CHECK(p.m == 80);
  CHECK(p.within_construction_window(100));
  CHECK_THROWS_AS(CEParams::for_n(19, 3.0), DomainError);
  CHECK_THROWS_AS(CEParams::for_n(100, 2.0), DomainError);
  for (std::int64_t n = 20; n <= 4096; n = n * 3 / 2) {
    for (double pp : {2.5, 3.0, 4.0}) {
      const CEParams c = CEParams::for_n(n, pp);
      CHECK(c.a >= 1.0);
      CHECK(static_cast<double>(c.k) >= 4.0 * c.a * c.a * (1.0 - 1e-12));
      CHECK(static_cast<double>(c.k) < 4.0 * c.a * c.a + 1.0);
      CHECK(c.m == n - c.k);
      // 4a^2 = 4 (n/4)^{1/(p-1)} only drops below n/4 once n is large
      // enough for p: n > 64 at p = 3, n > 256 at p = 2.5.
      if (c.within_construction_window(n)) {
        CHECK(static_cast<double>(c.k) < 1.0 + n / 4.0);
        CHECK(static_cast<double>(c.m) >= 0.7 * n);
      }
      if (n > 256 || (pp >= 3.0 && n > 64)) CHECK(c.within_construction_window(n));
    }
  }
}

TEST_CASE("CE branch algebra") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ux(1.0, 20.0);
  for (int t = 0; t < 100; ++t) {
    const double x = ux(gen);
    const std::int64_t k = 1 + static_cast<std::int64_t>(gen() % 60);
    const double kd = static_cast<double>(k);
    const double p_first = kd * kd / (x * x + kd * kd);
    const double v1 = -x / kd, v2 = kd / x;
    CHECK(p_first * v1 + (1.0 - p_first) * v2 == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(p_first * v1 * v1 + (1.0 - p_first) * v2 * v2 == doctest::Approx(1.0).epsilon(1e-12));
    for (double p : {2.5, 3.0, 4.0}) {
      const double direct =
          p_first * std::pow(std::fabs(v1), p) + (1.0 - p_first) * std::pow(std::fabs(v2), p);
      CHECK(ce_conditional_abs_moment(x, k, p) == doctest::Approx(direct).epsilon(1e-12));
    }
    // Exact cancellation when all k take the first value, either sign of S_m.
    CHECK(ce_branch_sum(x, k, k) == 0.0);
    CHECK(ce_branch_sum(-x, k, k) == 0.0);
    const std::int64_t b = static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(k));
    CHECK(ce_branch_sum(x, k, b) ==
          doctest::Approx(x + b * v1 + static_cast<double>(k - b) * v2).epsilon(1e-12));
  }
}

TEST_CASE("CE branch probability and trailing moments") {
  for (std::int64_t n : {20, 100, 1000}) {
    for (double p : {2.5, 3.0}) {
      const CEParams c = CEParams::for_n(n, p);
      const double sd = std::sqrt(static_cast<double>(c.m));
      CHECK(ce_branch_probability(c) ==
            doctest::Approx(2.0 * (normal_cdf(2.0 * c.a / sd) - normal_cdf(c.a / sd)))
                .epsilon(1e-13));
      const double moment = ce_trailing_abs_moment(c, p);
      CHECK(moment >= normal_abs_moment(p) * (1.0 - ce_branch_probability(c)) - 1e-12);
      if (c.within_construction_window(n)) {
        CHECK(moment <= normal_abs_moment(p) + std::pow(5.0, p - 2.0));
      }
    }
  }
}

TEST_CASE("ce_generate structure and exact atom") {
  const std::int64_t n = 100;
  const CEParams c = CEParams::for_n(n, 3.0);
  int branch = 0, zeros = 0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    const CEPath path = ce_generate(n, 3.0, {3, static_cast<std::uint64_t>(r)});
    REQUIRE(path.x.size() == 100);
    const double s_m = std::accumulate(path.x.begin(), path.x.begin() + c.m, 0.0);
    CHECK(s_m == doctest::Approx(path.s_m).epsilon(1e-12));
    const bool in = std::fabs(path.s_m) >= c.a && std::fabs(path.s_m) <= 2.0 * c.a;
    CHECK(path.branch == in);
    if (path.branch) {
      ++branch;
      for (std::int64_t j = c.m; j < n; ++j) {
        const double x = path.x[static_cast<std::size_t>(j)];
        const bool first = x == -path.s_m / static_cast<double>(c.k);
        const bool second = x == static_cast<double>(c.k) / path.s_m;
        CHECK((first || second));
      }
      if (path.first_branch_count == c.k) CHECK(path.s_n == 0.0);
    }
    zeros += path.s_n == 0.0;
  }
  const double pb = ce_branch_probability(c);
  CHECK(std::fabs(branch / double(reps) - pb) <= 4.0 * std::sqrt(pb * (1 - pb) / reps));
  CHECK(zeros > 0);
}

TEST_CASE("CE atom at n = 100 clears the threshold") {
  const auto spec = make(Family::ce_lowerbound, 100);
  const PathSampler sampler(spec);
  const int reps = 1000000;
  int zeros = 0;
  for (int r = 0; r < reps; ++r) zeros += sampler.sum({21, static_cast<std::uint64_t>(r)}) == 0.0;
  const double atom = zeros / double(reps);
  const double se = std::sqrt(atom * (1 - atom) / reps);
  CHECK(atom >= 0.12 * std::pow(100.0, -0.25) - 3.0 * se);
}

TEST_CASE("CE martingale structure given S_m") {
  const std::int64_t n = 64;
  const double p = 3.0;
  const CEParams c = CEParams::for_n(n, p);
  // Bins on |S_m| inside the branch window, plus the outside region.
  std::vector<std::vector<double>> first(6), second(6);
  for (int r = 0; r < 200000; ++r) {
    const CEPath path = ce_generate(n, p, {17, static_cast<std::uint64_t>(r)});
    const double s = std::fabs(path.s_m);
    std::size_t bin = 5;
    if (path.branch) bin = std::min<std::size_t>(4, static_cast<std::size_t>(5.0 * (s - c.a) / c.a));
    const double x = path.x[static_cast<std::size_t>(c.m)];
    first[bin].push_back(x);
    second[bin].push_back(x * x);
  }
  for (std::size_t b = 0; b < 6; ++b) {
    REQUIRE(first[b].size() > 100);
    const auto m1 = mean_se(first[b]);
    const auto m2 = mean_se(second[b]);
    CHECK(std::fabs(m1.mean) <= 3.0 * m1.se);
    CHECK(std::fabs(m2.mean - 1.0) <= 3.0 * m2.se);
  }
}

TEST_CASE("iid martingale property: binned conditional means vanish") {
  for (auto f : {Family::gaussian_iid, Family::rademacher_iid}) {
    const auto spec = make(f, 8);
    const PathSampler sampler(spec);
    std::vector<std::vector<double>> bins(4);
    for (int r = 0; r < 100000; ++r) {
      const Path path = sampler.path({23, static_cast<std::uint64_t>(r)});
      const double past = std::accumulate(path.xi.begin(), path.xi.begin() + 5, 0.0);
      const std::size_t bin = past < -1.5 ? 0 : past < 0.0 ? 1 : past < 1.5 ? 2 : 3;
      bins[bin].push_back(path.xi[5]);
    }
    for (const auto& b : bins) {
      const auto m = mean_se(b);
      CHECK(std::fabs(m.mean) <= 3.0 * m.se);
    }
  }
}

TEST_CASE("linear statistic variance") {
  auto spec = make(Family::linear_statistic, 2);
  spec.base.phi = 0.5;
  CHECK(exact_moments(spec).v_n == doctest::Approx(4.0).epsilon(1e-14));

  // phi = 0 reduces to the iid sum of squares.
  auto iid = make(Family::linear_statistic, 30);
  iid.base.phi = 0.0;
  iid.coefficients.kind = CoefficientRule::Kind::power;
  iid.coefficients.alpha = 0.5;
  double sq = 0.0;
  for (double a : iid.coefficients.materialize(30)) sq += a * a;
  CHECK(exact_moments(iid).v_n == doctest::Approx(sq).epsilon(1e-13));

  // Naive double sum for random weights, AR(1) and MA(3).
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> alphas(40);
  for (double& a : alphas) a = z(gen);
  LinearBase ar;
  ar.phi = -0.7;
  LinearBase ma;
  ma.kind = LinearBase::Kind::ma;
  ma.ma_coeffs = {1.0, 0.4, -0.3, 0.2};
  for (const LinearBase& base : {ar, ma}) {
    double naive = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i)
      for (std::size_t j = 0; j < alphas.size(); ++j)
        naive += alphas[i] * alphas[j] *
                 base.autocovariance(static_cast<std::int64_t>(i > j ? i - j : j - i));
    CHECK(linear_exact_variance(base, alphas) == doctest::Approx(naive).epsilon(1e-12));
  }
  CHECK(ar.autocovariance(0) == doctest::Approx(1.0 / 0.51).epsilon(1e-14));
  CHECK(ma.autocovariance(1) == doctest::Approx(0.4 - 0.12 - 0.06).epsilon(1e-14));
  CHECK(ma.autocovariance(4) == 0.0);
  CHECK(ar.long_run_variance() == doctest::Approx(1.0 / (1.7 * 1.7)).epsilon(1e-13));
}

TEST_CASE("power-rule weights give m_n / sqrt(sum alpha^2) of order n^{-1/2}") {
  CoefficientRule rule;
  rule.kind = CoefficientRule::Kind::power;
  rule.alpha = 1.0;
  for (std::int64_t n : {100, 10000}) {
    const auto a = rule.materialize(n);
    double sq = 0.0;
    for (double x : a) sq += x * x;
    const double ratio = *std::max_element(a.begin(), a.end()) / std::sqrt(sq);
    CHECK(ratio * std::sqrt(static_cast<double>(n)) == doctest::Approx(std::sqrt(3.0)).epsilon(0.02));
  }
}

TEST_CASE("linear_statistic_path") {
  auto spec = make(Family::linear_statistic, 50);
  spec.base.phi = 0.5;
  std::vector<double> sums;
  for (std::uint64_t r = 0; r < 40000; ++r) {
    const auto res = linear_statistic_path(spec, {31, r});
    sums.push_back(res.s_n * res.s_n);
    REQUIRE(res.v_n == exact_moments(spec).v_n);
  }
  const auto m = mean_se(sums);
  CHECK(std::fabs(m.mean - exact_moments(spec).v_n) <= 3.0 * m.se);
}

TEST_CASE("rho-mixing chain") {
  auto spec = make(Family::rho_mixing_chain, 4);
  const auto res = rho_mixing_path(spec, {1, 0});
  CHECK(res.c_n_bound == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(res.k_n == 1.0);
  CHECK(res.v_n == doctest::Approx(8.25).epsilon(1e-13));
  CHECK(res.x.size() == 4);

  spec.n = 100;
  double closed = 100.0;
  for (int k = 1; k < 100; ++k) closed += 2.0 * (100 - k) * std::pow(0.5, k);
  CHECK(exact_moments(spec).v_n == doctest::Approx(closed).epsilon(1e-12));

  auto indep = make(Family::rho_mixing_chain, 10);
  indep.chain.transition = {{0.5, 0.5}, {0.5, 0.5}};
  CHECK(exact_moments(indep).v_n == doctest::Approx(10.0).epsilon(1e-13));
  CHECK(rho_mixing_path(indep, {1, 0}).c_n_bound == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sequential maps") {
  SequentialParams cos1;
  CHECK(sequential_exact_variance(cos1, 50) == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(exact_moments(make(Family::sequential_maps, 50)).v_n == doctest::Approx(50.0).epsilon(1e-14));
  SequentialParams cos12;
  cos12.observable = Observable::cos12;
  for (std::int64_t n = 1; n <= 6; ++n) {
    CHECK(sequential_exact_variance(cos12, n) ==
          doctest::Approx(sequential_variance_by_grid(cos12, n)).epsilon(1e-10));
    CHECK(sequential_exact_variance(cos1, n) ==
          doctest::Approx(sequential_variance_by_grid(cos1, n)).epsilon(1e-10));
  }
  // Schedule 2,3: frequencies 2, 6 collide with the second harmonic of 1.
  SequentialParams two{{2, 2}, Observable::cos12};
  CHECK(sequential_exact_variance(two, 2) == doctest::Approx(0.625 * 2 + 0.5).epsilon(1e-14));
  CHECK(sequential_exact_variance(cos12, 2) == doctest::Approx(1.25).epsilon(1e-14));

  // Mean zero and S_1^2 mean one by simulation.
  auto s4 = make(Family::sequential_maps, 4);
  std::vector<std::vector<double>> inc(4);
  std::vector<double> s1sq;
  for (std::uint64_t r = 0; r < 50000; ++r) {
    const Path p = sample_path(s4, {41, r});
    for (std::size_t k = 0; k < 4; ++k) inc[k].push_back(p.xi[k]);
    s1sq.push_back(p.xi[0] * p.xi[0]);
  }
  for (const auto& v : inc) {
    const auto m = mean_se(v);
    CHECK(std::fabs(m.mean) <= 3.0 * m.se);
  }
  const auto m1 = mean_se(s1sq);
  CHECK(std::fabs(m1.mean - 1.0) <= 3.0 * m1.se);
}

TEST_CASE("exact_moments invariants") {
  auto ce = make(Family::ce_lowerbound, 100);
  const auto m = exact_moments(ce);
  CHECK(m.v_n == 100.0);
  CHECK(m.delta_n == 1.0);
  CHECK(m.conditional_variance_constant);

  auto ramp = make(Family::gaussian_iid, 2);
  ramp.coefficients.kind = CoefficientRule::Kind::ramp;
  CHECK(exact_moments(ramp).v_n == doctest::Approx(6.25).epsilon(1e-15));
  CHECK(exact_moments(ramp).delta_n == 2.0);

  std::vector<ModelSpec> specs{make(Family::gaussian_iid, 30), make(Family::rademacher_iid, 30),
                               make(Family::ce_lowerbound, 30), ramp};
  auto mart = make(Family::rho_mixing_chain, 30);
  mart.chain.transition = {{0.9, 0.1}, {0.3, 0.7}};
  mart.chain.f = {1.0, -3.0};
  mart.chain.view = ChainView::martingale;
  specs.push_back(mart);
  for (const auto& s : specs) {
    const auto e = exact_moments(s);
    CHECK(e.martingale);
    CHECK(e.v_n == doctest::Approx(std::accumulate(e.sigma2.begin(), e.sigma2.end(), 0.0))
                       .epsilon(1e-12));
    double d = 0.0;
    for (double v : e.sigma2) d = std::max(d, std::sqrt(v));
    CHECK(e.delta_n == d);
  }
}

TEST_CASE("exact and estimated V_n agree") {
  std::vector<ModelSpec> specs{make(Family::gaussian_iid, 20), make(Family::rademacher_iid, 20),
                               make(Family::ce_lowerbound, 40), make(Family::rho_mixing_chain, 20),
                               make(Family::sequential_maps, 20)};
  auto lin = make(Family::linear_statistic, 20);
  lin.base.phi = 0.5;
  specs.push_back(lin);
  auto cos12 = make(Family::sequential_maps, 6);
  cos12.sequential.observable = Observable::cos12;
  specs.push_back(cos12);
  auto mart = make(Family::rho_mixing_chain, 20);
  mart.chain.view = ChainView::martingale;
  mart.chain.transition = {{0.9, 0.1}, {0.3, 0.7}};
  mart.chain.f = {1.0, -3.0};
  specs.push_back(mart);
  for (const auto& s : specs) {
    const auto e = exact_moments(s);
    const auto est = estimate_moments(s, 40000, 55);
    CHECK_FALSE(est.exact);
    CHECK(est.v_n_se > 0.0);
    INFO(to_string(s.family));
    CHECK(std::fabs(est.v_n - e.v_n) <= 3.0 * est.v_n_se);
  }
}

TEST_CASE("ConditionalOracle availability") {
  CHECK(ConditionalOracle::for_model(make(Family::gaussian_iid, 5)).has_value());
  CHECK(ConditionalOracle::for_model(make(Family::ce_lowerbound, 30))->constant());
  CHECK_FALSE(ConditionalOracle::for_model(make(Family::sequential_maps, 5)).has_value());
  CHECK_FALSE(ConditionalOracle::for_model(make(Family::linear_statistic, 5)).has_value());
  CHECK_FALSE(ConditionalOracle::for_model(make(Family::rho_mixing_chain, 5)).has_value());
  auto ramp = make(Family::gaussian_iid, 4);
  ramp.coefficients.kind = CoefficientRule::Kind::ramp;
  const auto o = ConditionalOracle::for_model(ramp);
  const Path path = sample_path(ramp, {1, 1});
  CHECK(o->tail(path, 3) == doctest::Approx(o->tail_mean(3)).epsilon(1e-15));
  CHECK(o->tail_mean(3) == doctest::Approx(1.75 * 1.75 + 4.0).epsilon(1e-15));
}
