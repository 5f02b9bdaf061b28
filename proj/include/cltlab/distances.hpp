// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cltlab {

/// Which replicate streams produced a sample: streams
/// [first_stream, first_stream + replicates) under master_seed.
struct LineageSummary {
  std::uint64_t master_seed = 0;
  std::uint64_t first_stream = 0;
};

/// Sorted replicate values of a normalized statistic.
class EmpiricalSample {
 public:
  /// Sorts the values; throws DomainError if empty or any value is not
  /// finite.
  explicit EmpiricalSample(std::vector<double> values,
                           LineageSummary lineage = {},
                           std::string statistic_label = "S_n/sqrt(V_n)");

  std::span<const double> values() const { return values_; }
  std::size_t replicates() const { return values_.size(); }
  const LineageSummary& lineage() const { return lineage_; }
  const std::string& statistic_label() const { return label_; }

  /// Same law scaled by c (order reversed when c < 0).
  EmpiricalSample scaled(double c) const;

 private:
  std::vector<double> values_;
  LineageSummary lineage_;
  std::string label_;
};

struct WrEstimate {
  double r = 1.0;
  double value = 0.0;
  bool is_upper_bound = false;
};

struct DistanceReport {
  double kolmogorov = 0.0;
  double w1 = 0.0;
  std::optional<WrEstimate> wr;
  double mc_se_kolmogorov = 0.0;
  double mc_se_w1 = 0.0;
};

/// sup_x |F_R(x) - Phi(x)| for the empirical cdf F_R of the sample, taken
/// over both one-sided limits at every jump.
double kolmogorov_vs_normal(const EmpiricalSample& sample);

/// \int |F_R - Phi| in closed form, piece by piece between order statistics.
double w1_vs_normal(const EmpiricalSample& sample);

/// (1/R) sum |x_(i) - Phi^{-1}((i - 1/2)/R)|^r. For r < 1 the comonotone
/// coupling is not known to be optimal, so the value is flagged as an upper
/// bound on W_r.
WrEstimate wr_quantile_coupling(const EmpiricalSample& sample, double r);

/// (1 + (2 pi)^{-1/2}) * wr_value^{1/(p-1)}: the Kolmogorov distance implied
/// by a W_{p-2} distance to the standard Gaussian.
double be_transfer(double wr_value, double p);

/// Exact W1 between two empirical laws with the same number of atoms.
double two_sample_w1(const EmpiricalSample& a, const EmpiricalSample& b);

/// Dvoretzky-Kiefer-Wolfowitz half-width sqrt(ln(2/0.05) / (2R)).
double dkw_kolmogorov_se(std::size_t replicates);

/// Builds a report from replicate values given in replicate order. The W1
/// standard error comes from batch means over `batches` contiguous splits of
/// that order. When wr_r is set, the quantile-coupling W_r is included.
DistanceReport distance_report(std::span<const double> replicate_values,
                               std::optional<double> wr_r = std::nullopt,
                               int batches = 10);

/// Whether Kolmogorov <= be_transfer(w1, 3) + 3 (se_k + se_w1).
bool transfer_inequality_holds(const DistanceReport& report);

}  // namespace cltlab
