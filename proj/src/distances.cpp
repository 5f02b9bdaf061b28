// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/distances.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cltlab/numerics.hpp"

namespace cltlab {

EmpiricalSample::EmpiricalSample(std::vector<double> values,
                                 LineageSummary lineage,
                                 std::string statistic_label)
    : values_(std::move(values)),
      lineage_(lineage),
      label_(std::move(statistic_label)) {
  if (values_.empty()) throw DomainError("EmpiricalSample: sample is empty");
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw DomainError("EmpiricalSample: sample contains a non-finite value");
    }
  }
  std::sort(values_.begin(), values_.end());
}

EmpiricalSample EmpiricalSample::scaled(double c) const {
  std::vector<double> v(values_.size());
  std::transform(values_.begin(), values_.end(), v.begin(),
                 [c](double x) { return c * x; });
  return EmpiricalSample(std::move(v), lineage_, label_);
}

double kolmogorov_vs_normal(const EmpiricalSample& sample) {
  const auto x = sample.values();
  const double r = static_cast<double>(x.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double phi = normal_cdf(x[i]);
    const double below = static_cast<double>(i) / r;
    const double above = static_cast<double>(i + 1) / r;
    sup = std::max({sup, std::fabs(above - phi), std::fabs(below - phi)});
  }
  return std::min(sup, 1.0);
}

namespace {

// \int_lo^hi |Phi(t) - c| dt for a constant level c.
double abs_piece(double lo, double hi, double c) {
  if (!(hi > lo)) return 0.0;
  if (c <= 0.0) return integral_phi_minus_const(lo, hi, 0.0);
  if (c >= 1.0) return -integral_phi_minus_const(lo, hi, 1.0);
  const double cross = normal_quantile(c);
  if (cross <= lo) return integral_phi_minus_const(lo, hi, c);
  if (cross >= hi) return -integral_phi_minus_const(lo, hi, c);
  return -integral_phi_minus_const(lo, cross, c) +
         integral_phi_minus_const(cross, hi, c);
}

}  // namespace

double w1_vs_normal(const EmpiricalSample& sample) {
  const auto x = sample.values();
  const std::size_t n = x.size();
  const double r = static_cast<double>(n);
  double total = integral_of_phi(x.front()) + integral_of_phi(-x.back());
  for (std::size_t i = 0; i + 1 < n; ++i) {
    total += abs_piece(x[i], x[i + 1], static_cast<double>(i + 1) / r);
  }
  return total;
}

WrEstimate wr_quantile_coupling(const EmpiricalSample& sample, double r) {
  if (!(r > 0.0 && r <= 1.0)) {
    throw DomainError("wr_quantile_coupling: r must lie in (0, 1]");
  }
  const auto x = sample.values();
  const double size = static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double q = normal_quantile((static_cast<double>(i) + 0.5) / size);
    const double d = std::fabs(x[i] - q);
    acc += r == 1.0 ? d : std::pow(d, r);
  }
  return {r, acc / size, r < 1.0};
}

double be_transfer(double wr_value, double p) {
  if (!(p > 2.0 && p <= 3.0)) {
    throw DomainError("be_transfer: p must lie in (2, 3]");
  }
  if (!(wr_value >= 0.0)) {
    throw DomainError("be_transfer: distance must be nonnegative");
  }
  return (1.0 + kInvSqrt2Pi) * std::pow(wr_value, 1.0 / (p - 1.0));
}

double two_sample_w1(const EmpiricalSample& a, const EmpiricalSample& b) {
  if (a.replicates() != b.replicates()) {
    throw DomainError("two_sample_w1: samples must have equal sizes");
  }
  const auto xa = a.values();
  const auto xb = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < xa.size(); ++i) acc += std::fabs(xa[i] - xb[i]);
  return acc / static_cast<double>(xa.size());
}

double dkw_kolmogorov_se(std::size_t replicates) {
  return std::sqrt(std::log(2.0 / 0.05) / (2.0 * static_cast<double>(replicates)));
}

DistanceReport distance_report(std::span<const double> replicate_values,
                               std::optional<double> wr_r, int batches) {
  if (replicate_values.empty()) {
    throw DomainError("distance_report: sample is empty");
  }
  const EmpiricalSample full(
      std::vector<double>(replicate_values.begin(), replicate_values.end()));
  DistanceReport report;
  report.kolmogorov = kolmogorov_vs_normal(full);
  report.w1 = w1_vs_normal(full);
  report.mc_se_kolmogorov = dkw_kolmogorov_se(full.replicates());
  if (wr_r) report.wr = wr_quantile_coupling(full, *wr_r);

  const std::size_t size = replicate_values.size();
  const std::size_t nb =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(batches, 0)), size);
  if (nb >= 2) {
    std::vector<double> batch_w1;
    batch_w1.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t lo = b * size / nb;
      const std::size_t hi = (b + 1) * size / nb;
      batch_w1.push_back(w1_vs_normal(EmpiricalSample(std::vector<double>(
          replicate_values.begin() + static_cast<std::ptrdiff_t>(lo),
          replicate_values.begin() + static_cast<std::ptrdiff_t>(hi)))));
    }
    const double mean =
        std::accumulate(batch_w1.begin(), batch_w1.end(), 0.0) / static_cast<double>(nb);
    double ss = 0.0;
    for (double v : batch_w1) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(nb - 1));
    report.mc_se_w1 = sd / std::sqrt(static_cast<double>(nb));
  }
  return report;
}

bool transfer_inequality_holds(const DistanceReport& report) {
  return report.kolmogorov <=
         be_transfer(report.w1, 3.0) +
             3.0 * (report.mc_se_kolmogorov + report.mc_se_w1);
}

}  // namespace cltlab
