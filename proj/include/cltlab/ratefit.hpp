// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cltlab {

enum class DistanceKind { kolmogorov, w1, w1_normalized };
std::string to_string(DistanceKind kind);
DistanceKind distance_kind_from_string(const std::string& tag);

struct RatePoint {
  std::int64_t n = 0;
  double v_n = 0.0;
  double distance = 0.0;
  double se = 0.0;
};

struct RateSeries {
  std::vector<RatePoint> points;
  std::string model_id;
  DistanceKind kind = DistanceKind::kolmogorov;

  /// Throws DomainError unless n is strictly increasing.
  void validate() const;
};

enum class Verdict { consistent, inconsistent, inconclusive };
std::string to_string(Verdict verdict);

struct RateFitResult {
  double exponent = 0.0;
  double intercept = 0.0;
  double ci_halfwidth = 0.0;  // 95%
  double log_corrected_exponent = 0.0;
  double log_corrected_ci_halfwidth = 0.0;
  double target_exponent = 0.0;
  bool target_log_corrected = false;  // verdict compares the log-corrected fit
  Verdict verdict = Verdict::inconclusive;
  std::size_t points_used = 0;
  std::size_t seeds = 1;
  std::string note;
};

struct FitOptions {
  double target = 0.0;
  double tolerance = 0.05;
  bool target_log_corrected = false;
  double min_decades = 2.0;
};

/// Weighted least squares of log d on log n with weights (d / se)^2 (equal
/// weights when any se is 0); the log-corrected variant regresses
/// log d - log log n. Points with d <= 0 (and, for the log-corrected fit,
/// n <= e) are dropped with a note. Fewer than 4 points or a span under
/// `min_decades` decades give an inconclusive verdict, never an exception.
/// The CI uses the regression standard error.
RateFitResult fit(const RateSeries& series, const FitOptions& options);

/// As above on the pooled series, with the CI taken from refitting each of
/// the per-seed series (t quantile with S - 1 degrees of freedom).
RateFitResult fit(const RateSeries& pooled, std::span<const RateSeries> per_seed,
                  const FitOptions& options);

/// Raw and log-corrected slopes only (no verdict).
struct Slopes {
  double exponent = 0.0;
  double intercept = 0.0;
  double exponent_se = 0.0;
  double log_corrected = 0.0;
  double log_corrected_se = 0.0;
  std::size_t points = 0;
  std::size_t log_points = 0;
};
Slopes fit_slopes(const RateSeries& series);

/// Smallest C with d_i <= C * shape_i at the first point, and whether every
/// later point satisfies d_i <= C * shape_i + slack * se_i.
struct EnvelopeCheck {
  double constant = 0.0;
  bool holds = false;
  std::size_t worst_index = 0;
  double worst_margin = 0.0;  // max_i (d_i - slack se_i) / (C shape_i)
};
EnvelopeCheck envelope_check(const RateSeries& series, std::span<const double> shape,
                             double slack = 3.0);

}  // namespace cltlab
