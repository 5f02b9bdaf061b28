// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cltlab/config.hpp"
#include "cltlab/distances.hpp"
#include "cltlab/models.hpp"
#include "cltlab/ratefit.hpp"

namespace cltlab {

/// Terminal sums of replicates 0..R-1 (stream id = replicate index), in
/// replicate order whatever the worker count.
std::vector<double> simulate_sums(const PathSampler& sampler, std::int64_t replicates,
                                  std::uint64_t master_seed, int threads);

/// Increments of replicates 0..R-1, replicate-major (R x n).
std::vector<double> simulate_paths(const PathSampler& sampler, std::int64_t replicates,
                                   std::uint64_t master_seed, int threads);

/// Divisor applied to S_n before comparison with N(0, 1).
double normalization_scale(const ModelSpec& spec, Normalization norm);

struct DistanceRow {
  std::string model_id;
  std::int64_t n = 0;
  double p = 3.0;
  std::int64_t replicates = 0;
  DistanceReport report;
  double v_n = 0.0;
  double scale = 1.0;
  double be_transfer = 0.0;  // (1 + (2 pi)^{-1/2}) w1^{1/2}
  std::uint64_t master_seed = 0;
};

DistanceRow distance_row(const std::string& model_id, const ModelSpec& spec,
                         std::span<const double> sums, std::uint64_t master_seed,
                         Normalization norm, std::optional<double> wr_r);

/// Simulates R sums and reports their distances.
DistanceRow measure_distance(const std::string& model_id, const ModelSpec& spec,
                             std::int64_t replicates, std::uint64_t master_seed, int threads,
                             Normalization norm = Normalization::exact_variance,
                             std::optional<double> wr_r = std::nullopt);

void write_distance_csv_header(std::ostream& out);
void write_distance_csv_row(std::ostream& out, const DistanceRow& row);
std::string distance_csv(std::span<const DistanceRow> rows);
/// Reads rows written by distance_csv. Throws ConfigError on malformed input.
std::vector<DistanceRow> parse_distance_csv(const std::string& text);

/// Distance picked out of a row; w1 is in units of the normalized statistic,
/// w1_normalized is multiplied back by the scale.
double row_distance(const DistanceRow& row, DistanceKind kind);
double row_distance_se(const DistanceRow& row, DistanceKind kind);
RateSeries rate_series(std::span<const DistanceRow> rows, DistanceKind kind);

void write_ratefit_csv_header(std::ostream& out);
void write_ratefit_csv_row(std::ostream& out, const std::string& model_id, DistanceKind kind,
                           const RateFitResult& result);

/// One row of the lower-bound verification table.
struct CeCheckRow {
  std::int64_t n = 0;
  double p = 3.0;
  std::int64_t replicates = 0;
  double atom = 0.0;
  double atom_se = 0.0;
  double atom_threshold = 0.0;  // 0.12 n^{-(p-2)/(2p-2)}
  double kolmogorov = 0.0;
  double kolmogorov_se = 0.0;
  double kolmogorov_threshold = 0.0;  // 0.06 n^{-(p-2)/(2p-2)}
  double moment = 0.0;                // max_k empirical E|X_k|^p
  double moment_se = 0.0;
  double moment_cap = 0.0;            // E|Y|^p + 5^{p-2}
  bool atom_ok = false;
  bool kolmogorov_ok = false;
  bool moment_ok = false;
  bool all_ok() const { return atom_ok && kolmogorov_ok && moment_ok; }
};

/// The atom and Kolmogorov checks use the fast sum path with `replicates`;
/// the moment check samples full paths with `moment_replicates`.
CeCheckRow verify_ce_row(std::int64_t n, double p, std::int64_t replicates,
                         std::int64_t moment_replicates, std::uint64_t master_seed, int threads);
void write_ce_csv_header(std::ostream& out);
void write_ce_csv_row(std::ostream& out, const CeCheckRow& row);

}  // namespace cltlab
