// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "cltlab/bounds.hpp"
#include "cltlab/numerics.hpp"
#include "cltlab/random.hpp"
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

ModelSpec asym_martingale(std::int64_t n) {
  auto s = make(Family::rho_mixing_chain, n);
  s.chain.transition = {{0.9, 0.1}, {0.3, 0.7}};
  s.chain.f = {1.0, -3.0};
  s.chain.view = ChainView::martingale;
  return s;
}

double p_norm(const std::vector<double>& v, double q) {
  double s = 0.0;
  for (double x : v) s += std::pow(std::fabs(x), q);
  return std::pow(s / static_cast<double>(v.size()), 1.0 / q);
}

Theorem1Options explicit_opts() {
  Theorem1Options o;
  o.mode = ConstantsMode::explicit_r1;
  return o;
}

}  // namespace

TEST_CASE("gaussian psi kernel against quadrature") {
  for (double c : {0.0, 0.05, 0.5, 1.0, 3.0, 20.0}) {
    auto f = [c](double z) { return std::min(c * z * z, std::fabs(z * z * z)) * normal_pdf(z); };
    const double q = 2.0 * (integrate(f, 0.0, c) + integrate(f, c, 40.0));
    CHECK(gaussian_psi_kernel(c) == doctest::Approx(q).epsilon(1e-10));
  }
}

TEST_CASE("psi_n examples and properties") {
  const auto rad = make(Family::rademacher_iid, 50);
  for (double t : {0.0, 0.2, 0.99, 1.0, 3.0}) {
    CHECK(psi_n(t, rad, PsiMode::closed_form).value == doctest::Approx(std::min(t, 1.0)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(psi_n(-1.0, rad, PsiMode::closed_form), DomainError);
  CHECK_THROWS_AS(psi_n(1.0, make(Family::sequential_maps, 5), PsiMode::closed_form), DomainError);

  auto ramp = make(Family::gaussian_iid, 20);
  ramp.coefficients.kind = CoefficientRule::Kind::ramp;
  std::vector<ModelSpec> specs{rad, make(Family::gaussian_iid, 20), ramp,
                               make(Family::ce_lowerbound, 40), asym_martingale(8)};
  const std::vector<double> ts{0.0, 0.01, 0.1, 0.3, 1.0, 2.0, 10.0, 100.0};
  for (const auto& spec : specs) {
    INFO(to_string(spec.family));
    REQUIRE(psi_has_closed_form(spec));
    const auto exact = psi_exact(spec);
    const auto moments = exact_moments(spec);
    const double ratio3 = moment_ratio(spec, 3.0).value;
    double prev = 0.0;
    for (double t : ts) {
      const double v = exact(t);
      CHECK(v >= prev - 1e-15);
      CHECK(v <= std::min(t * moments.delta_n, ratio3) + 1e-12);
      prev = v;
    }
    CHECK(exact(0.0) == 0.0);
    // Closed form against Monte Carlo within 3 SE.
    const auto mc = psi_monte_carlo(spec, ts, {40000, 3, 1});
    for (std::size_t i = 0; i < ts.size(); ++i) {
      CHECK(std::fabs(mc[i].value - exact(ts[i])) <= 3.0 * mc[i].se + 1e-12);
      CHECK(mc[i].value <= std::min(ts[i] * moments.delta_n, ratio3) + 3.0 * mc[i].se + 1e-12);
    }
  }
}

TEST_CASE("moment ratios") {
  CHECK(moment_ratio(make(Family::gaussian_iid, 10), 3.0).value ==
        doctest::Approx(normal_abs_moment(3.0)).epsilon(1e-12));
  CHECK(moment_ratio(make(Family::rademacher_iid, 10), 2.5).value == doctest::Approx(1.0));
  CHECK(abs_moment_sum(make(Family::rademacher_iid, 10), 3.0).value == doctest::Approx(10.0));
  const auto ce = make(Family::ce_lowerbound, 100);
  const CEParams c = CEParams::for_n(100, 3.0);
  CHECK(moment_ratio(ce, 3.0).value ==
        doctest::Approx(std::max(normal_abs_moment(3.0), ce_trailing_abs_moment(c, 3.0))).epsilon(1e-12));
  const auto mc = moment_ratio(make(Family::sequential_maps, 6), 3.0, {20000, 1, 1});
  CHECK_FALSE(mc.exact);
  // |sqrt(2) cos|^3 mean: 2^{3/2} * 4 / (3 pi).
  CHECK(std::fabs(mc.value - std::pow(2.0, 1.5) * 4.0 / (3.0 * std::acos(-1.0))) <= 4.0 * mc.se + 1e-9);
}

TEST_CASE("vn_of_a") {
  PathMoments m;
  m.delta_n = 1.0;
  m.v_n = 10.0;
  CHECK(vn_of_a(1.0, m) == 21.0);
  m.v_n = 100.0;
  CHECK(vn_of_a(2.0, m) == 129.0);
  CHECK(vn_of_a(1e6, m) / 1e12 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(vn_of_a(0.5, m), DomainError);
}

TEST_CASE("l_n") {
  PathMoments m;
  m.sigma2 = {1.0, 2.0};
  m.v_n = 3.0;
  m.delta_n = std::sqrt(2.0);
  UProfile u;
  u.value = {0.7};
  u.se = {0.0};
  u.all_zero = false;
  for (double a : {1.0, 2.0}) {
    for (double p : {2.5, 3.0}) {
      const double expect = 0.7 / std::pow(2.0 + a * a * 2.0, (p - 1.0) / 2.0);
      CHECK(l_n(p, 1.0, a, m, u).value == doctest::Approx(expect).epsilon(1e-14));
    }
  }
  CHECK(l_n(3.0, 1.0, 1.0, make(Family::ce_lowerbound, 50)).value == 0.0);
  CHECK(l_n(3.0, 1.0, 1.0, make(Family::gaussian_iid, 50)).value == 0.0);

  const auto chain = asym_martingale(30);
  double prev = 1e300;
  for (double a : {1.0, 1.5, 2.0, 4.0, 10.0}) {
    const double v = l_n(3.0, 1.0, a, exact_moments(chain), u_profile(chain, 3.0, {}, true)).value;
    CHECK(v > 0.0);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("theorem1_rhs") {
  const auto rad = make(Family::rademacher_iid, 100);
  const auto b = theorem1_rhs(1.0, 3.0, 1.0, rad);
  REQUIRE(b.term("psi_integral") != nullptr);
  CHECK(std::fabs(b.term("psi_integral")->value - 0.5 * std::log(201.0)) <= 1e-9);
  CHECK(b.term("smoothing")->value == doctest::Approx(4.0 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(b.term("L_n")->value == 0.0);
  CHECK(*b.parameter("v_n(a)") == 201.0);
  CHECK(std::fabs(b.total - b.recompute_total()) <= 1e-12);
  // Drift integral: int_1^{sqrt 201} x^{-2} dx.
  CHECK(b.term("drift_integral")->value ==
        doctest::Approx(1.0 - 1.0 / std::sqrt(201.0)).epsilon(1e-5));
  for (const auto& t : b.terms) CHECK(t.value >= 0.0);

  // Gaussian psi integral against adaptive quadrature of the closed form.
  const auto g = make(Family::gaussian_iid, 200);
  const auto bg = theorem1_rhs(1.0, 3.0, 2.0, g);
  const double hi = std::sqrt(vn_of_a(2.0, exact_moments(g)));
  const double q = integrate([](double x) { return gaussian_psi_kernel(6.0 * x) / x; }, 2.0, hi, 1e-12);
  CHECK(bg.term("psi_integral")->value == doctest::Approx(q).epsilon(1e-6));
  CHECK(*bg.parameter("psi_quadrature_error") <= 1e-6 * q);

  const auto ex = theorem1_rhs(1.0, 3.0, 1.0, rad, explicit_opts());
  CHECK(ex.constants_mode == ConstantsMode::explicit_r1);
  CHECK(ex.total > b.total);
  CHECK(ex.term("smoothing")->value == b.term("smoothing")->value);
  CHECK_THROWS(theorem1_rhs(0.5, 3.0, 1.0, rad, explicit_opts()));
  CHECK_THROWS_AS(theorem1_rhs(1.0, 3.0, 0.5, rad), DomainError);

  const auto chain = theorem1_rhs(1.0, 3.0, 1.0, asym_martingale(20));
  CHECK(chain.term("L_n")->value > 0.0);
  CHECK(std::fabs(chain.total - chain.recompute_total()) <= 1e-12);

  const auto autoa = theorem1_auto_a(1.0, 3.0, make(Family::gaussian_iid, 256));
  const double a = *autoa.parameter("a");
  CHECK(a >= 1.0);
  CHECK(a <= 16.0);
  for (double other : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    CHECK(autoa.total <= theorem1_rhs(1.0, 3.0, other, make(Family::gaussian_iid, 256)).total + 1e-12);
  }
}

TEST_CASE("corollary_w1_bound") {
  const auto g = make(Family::gaussian_iid, 100);
  const auto b = corollary_w1_bound(3.0, 1.0, 1.0, g);
  CHECK(b.term("moment_log")->value ==
        doctest::Approx(normal_abs_moment(3.0) * std::log(std::sqrt(201.0))).epsilon(1e-12));
  const auto half = corollary_w1_bound(2.5, 0.5, 1.0, make(Family::rademacher_iid, 100));
  CHECK(half.term("moment_power")->value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(half.total - half.recompute_total()) <= 1e-12);
}

TEST_CASE("Berry-Esseen and Heyde-Brown shapes") {
  CHECK(berry_esseen_exponent(3.0) == -0.25);
  CHECK(berry_esseen_exponent(2.5) == doctest::Approx(-1.0 / 6.0).epsilon(1e-15));
  for (std::int64_t n : {16, 256, 4096}) {
    const auto rad = make(Family::rademacher_iid, n);
    const double nd = static_cast<double>(n);
    CHECK(heyde_brown_bound(3.0, rad).total == doctest::Approx(std::pow(nd, -0.125)).epsilon(1e-12));
    CHECK(heyde_brown_bound(2.5, rad).total ==
          doctest::Approx(std::pow(nd, -1.0 / 14.0)).epsilon(1e-12));
    const auto be = berry_esseen_bound(3.0, rad);
    CHECK(be.term("L_n")->value == 0.0);
    CHECK(be.total == doctest::Approx(std::pow(nd, -0.25) *
                                      std::sqrt(std::log(std::sqrt(1.0 + 2.0 * nd))))
                          .epsilon(1e-12));
  }
  const auto hb = heyde_brown_bound(3.0, make(Family::rademacher_iid, 64));
  REQUIRE(hb.target_exponent.has_value());
  CHECK(*hb.target_exponent == doctest::Approx(-0.125));
  CHECK(berry_esseen_exponent(3.0) < *hb.target_exponent);
  const auto be25 = berry_esseen_bound(2.5, make(Family::gaussian_iid, 64));
  CHECK(be25.prefactor == doctest::Approx(std::pow(64.0, -1.0 / 6.0)).epsilon(1e-12));
  CHECK_THROWS_AS(heyde_brown_bound(4.5, make(Family::gaussian_iid, 64)), DomainError);
  const auto chain = heyde_brown_bound(3.0, asym_martingale(20), {4000, 2, 1});
  CHECK(chain.total > 0.0);
}

TEST_CASE("bnp") {
  const std::int64_t n = 50;
  std::vector<double> ones(n, 1.0), lambda(n), eta(n + 1);
  for (std::int64_t i = 0; i < n; ++i) lambda[i] = std::pow(0.5, i + 1);
  for (std::int64_t i = 0; i <= n; ++i) eta[i] = std::pow(0.6, i);
  double big_lambda = 0.0, eta_sum = 0.0;
  for (std::int64_t i = 1; i <= n; ++i) big_lambda += i * lambda[i - 1];
  for (double e : eta) eta_sum += e;
  CHECK(bnp(n, 3.0, ones, lambda, eta) ==
        doctest::Approx(eta_sum * (big_lambda + eta_sum * eta_sum) * std::log(50.0)).epsilon(1e-13));
  CHECK(bnp(n, 2.5, ones, lambda, eta) ==
        doctest::Approx(std::sqrt(eta_sum) * (big_lambda + eta_sum * eta_sum) * std::pow(50.0, 0.25))
            .epsilon(1e-13));
  std::vector<double> zero(n, 0.0), single(n + 1, 0.0);
  single[0] = 2.0;
  std::vector<double> alphas(n, 3.0);
  CHECK(bnp(n, 2.5, alphas, zero, single) ==
        doctest::Approx(std::pow(3.0 * 2.0, 0.5) * 4.0 * std::pow(9.0 * n, 0.25)).epsilon(1e-13));
  CHECK_THROWS_AS(bnp(n, 3.0, std::vector<double>{}, lambda, eta), DomainError);
}

TEST_CASE("Gaussian moment constants") {
  CHECK(gaussian_cp(3.0) == doctest::Approx(std::pow(normal_abs_moment(3.0), 2.0 / 3.0)).epsilon(1e-14));
  CHECK(gaussian_dp(4.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
  // E|Z^2 - 1| = 4 phi(1).
  CHECK(gaussian_dp(2.0) == doctest::Approx(4.0 * normal_pdf(1.0)).epsilon(1e-10));
  Stream s({8, 0});
  for (double cov : {0.0, 0.3, -0.8}) {
    std::vector<double> v;
    for (int i = 0; i < 400000; ++i) {
      const double x = s.normal();
      const double y = cov * x + std::sqrt(1.0 - cov * cov) * s.normal();
      v.push_back(std::pow(std::fabs(x * 2.0 * y - 0.5), 1.5));
    }
    double mean = 0.0, sq = 0.0;
    for (double x : v) {
      mean += x;
      sq += x * x;
    }
    mean /= v.size();
    const double se = std::sqrt((sq / v.size() - mean * mean) / v.size());
    CHECK(std::fabs(bivariate_product_abs_moment(1.0, 4.0, 2.0 * cov, 0.5, 1.5) - mean) <= 4.0 * se);
  }
}

TEST_CASE("linear dependence coefficients against simulated conditional expectations") {
  const double p = 3.0;
  Stream s({12, 0});
  SUBCASE("AR(1)") {
    LinearBase ar;
    ar.phi = 0.5;
    const auto dep = linear_dependence(ar, 6, p);
    const double g0 = ar.autocovariance(0);
    std::vector<double> y0;
    for (int i = 0; i < 400000; ++i) y0.push_back(std::sqrt(g0) * s.normal());
    for (std::size_t i = 0; i <= 6; ++i) {
      // E(Y_i | G_0) = phi^i Y_0.
      std::vector<double> cond;
      for (double y : y0) cond.push_back(std::pow(0.5, i) * y);
      CHECK(dep.eta_p[i] == doctest::Approx(p_norm(cond, p)).epsilon(0.01));
      CHECK(dep.eta_2[i] == doctest::Approx(p_norm(cond, 2.0)).epsilon(0.01));
    }
    for (std::size_t k = 1; k <= 6; ++k) {
      std::vector<double> a, b;
      const double pk = std::pow(0.5, k);
      for (double y : y0) {
        a.push_back(y * pk * y);
        b.push_back(pk * pk * (y * y - g0));
      }
      CHECK(dep.lambda[k - 1] ==
            doctest::Approx(std::max(p_norm(a, p / 2.0), p_norm(b, p / 2.0))).epsilon(0.01));
    }
  }
  SUBCASE("MA(2)") {
    LinearBase ma;
    ma.kind = LinearBase::Kind::ma;
    ma.ma_coeffs = {1.0, 0.6, -0.4};
    const auto dep = linear_dependence(ma, 4, p);
    // A_i = sum_{j >= i} theta_j e_{i-j} from simulated innovations e_0, e_{-1}, e_{-2}.
    const int reps = 400000;
    std::vector<std::vector<double>> acol(3);
    for (int r = 0; r < reps; ++r) {
      const double e0 = s.normal(), e1 = s.normal(), e2 = s.normal();
      acol[0].push_back(e0 + 0.6 * e1 - 0.4 * e2);
      acol[1].push_back(0.6 * e0 - 0.4 * e1);
      acol[2].push_back(-0.4 * e0);
    }
    const double cov[3][3] = {{1.52, 0.0, 0.0}, {0.0, 0.52, -0.24}, {0.0, -0.24, 0.16}};
    for (std::size_t i = 0; i <= 2; ++i) {
      CHECK(dep.eta_p[i] == doctest::Approx(p_norm(acol[i], p)).epsilon(0.01));
    }
    CHECK(dep.eta_p[3] == 0.0);
    for (std::size_t k = 1; k <= 2; ++k) {
      std::vector<double> first;
      for (int r = 0; r < reps; ++r) first.push_back(acol[0][r] * acol[k][r]);
      double second = 0.0;
      for (std::size_t i = k; i <= 2; ++i) {
        for (std::size_t j = i; j <= 2; ++j) {
          std::vector<double> c;
          for (int r = 0; r < reps; ++r) c.push_back(acol[i][r] * acol[j][r] - cov[i][j]);
          second = std::max(second, p_norm(c, p / 2.0));
        }
      }
      CHECK(dep.lambda[k - 1] == doctest::Approx(std::max(p_norm(first, p / 2.0), second)).epsilon(0.01));
    }
    CHECK(dep.lambda[2] == 0.0);
  }
}

TEST_CASE("linear_bound") {
  auto spec = make(Family::linear_statistic, 128);
  spec.base.phi = 0.5;
  const auto b = linear_bound(3.0, spec);
  CHECK(b.total > 0.0);
  CHECK(std::fabs(b.total - b.recompute_total()) <= 1e-12);
  CHECK(b.term("coefficient_variation") == nullptr);
  auto ramp = spec;
  ramp.coefficients.kind = CoefficientRule::Kind::ramp;
  const auto extra = linear_bound(3.0, ramp, false);
  REQUIRE(extra.term("coefficient_variation") != nullptr);
  CHECK(extra.term("coefficient_variation")->value ==
        doctest::Approx(std::sqrt(std::pow(1.0 + 1.0 / 128.0, 2) + 4.0 + 127.0 / (128.0 * 128.0)))
            .epsilon(1e-12));
}

TEST_CASE("rho-mixing and sequential shapes") {
  CHECK(rho_mixing_bound(1.0, 1.0, std::exp(1.0) - 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  const auto spec = make(Family::rho_mixing_chain, 100);
  const auto b = rho_mixing_breakdown(spec);
  const double v = exact_moments(spec).v_n;
  CHECK(*b.parameter("C_n_bound") == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(*b.parameter("V_n") == v);
  CHECK(b.total == doctest::Approx(rho_mixing_bound(1.0, 3.0, v)).epsilon(1e-12));
  CHECK(*b.parameter("C_n") <= 3.0);
  // Normalized shape decays like V^{-1/2} log V.
  const double r1 = rho_mixing_bound(1.0, 3.0, 1e4) / std::sqrt(1e4);
  const double r2 = rho_mixing_bound(1.0, 3.0, 1e6) / std::sqrt(1e6);
  CHECK(r2 < r1);
  CHECK(r2 / r1 == doctest::Approx(0.1 * std::log(3e6) / std::log(3e4)).epsilon(0.05));

  CHECK(seqdyn_bound(1, 0.0) == doctest::Approx(std::log(2.0) * std::log(2.0)).epsilon(1e-15));
  const auto sq = seqdyn_breakdown(make(Family::sequential_maps, 50));
  CHECK(sq.total == doctest::Approx(std::log(51.0) * std::log(52.0)).epsilon(1e-14));
  double prev = 1e300;
  for (std::int64_t n : {10, 100, 1000, 100000, 10000000}) {
    const double norm = seqdyn_bound(n, static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
    if (n >= 1000) CHECK(norm < prev);
    prev = norm;
  }
  CHECK(prev < 0.1);
}

TEST_CASE("evaluate_bound dispatch and CSV") {
  const auto tags = known_bound_tags();
  CHECK(std::find(tags.begin(), tags.end(), "theorem1") != tags.end());
  BoundRequest req;
  req.tag = "nope";
  CHECK_THROWS_AS(evaluate_bound(req, make(Family::gaussian_iid, 10)), ConfigError);
  req.tag = "theorem1";
  req.a = 2.0;
  const auto b = evaluate_bound(req, make(Family::ce_lowerbound, 100));
  CHECK(b.term("L_n")->value == 0.0);
  CHECK(*b.parameter("v_n(a)") == vn_of_a(2.0, exact_moments(make(Family::ce_lowerbound, 100))));
  req.a.reset();
  const auto autob = evaluate_bound(req, make(Family::ce_lowerbound, 100));
  CHECK(autob.parameter("auto_a").has_value());

  std::ostringstream out;
  write_breakdown_csv_header(out);
  write_breakdown_csv(out, b);
  const std::string csv = out.str();
  CHECK(csv.rfind("equation_tag,term_name,value,se,exact_flag,paper_ref\n", 0) == 0);
  CHECK(csv.find(",total,") != std::string::npos);
  CHECK(csv.find("smoothing") != std::string::npos);
  std::ostringstream table;
  print_breakdown_table(table, b);
  CHECK(table.str().find("psi_integral") != std::string::npos);
}
