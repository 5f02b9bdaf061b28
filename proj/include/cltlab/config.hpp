// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cltlab/bounds.hpp"
#include "cltlab/models.hpp"
#include "cltlab/ratefit.hpp"

namespace cltlab {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// How the terminal sum is scaled before comparison with N(0, 1).
enum class Normalization {
  exact_variance,  // S_n / sqrt(V_n)
  long_run,        // linear statistics: S_n / sqrt(sigma^2 sum alpha^2)
};
std::string to_string(Normalization norm);

struct ExperimentConfig {
  ModelSpec model;
  std::string model_id;
  std::vector<std::int64_t> n_grid;
  std::int64_t replicates = 200000;
  std::uint64_t master_seed = 0;
  std::string outputs = "out";
  std::vector<std::string> bound_requests;
  std::optional<double> a;  // nullopt: auto
  double r = 1.0;
  ConstantsMode constants_mode = ConstantsMode::shape_only;
  double kappa = 6.0;
  PsiMode psi_mode = PsiMode::closed_form;
  std::int64_t u_replicates = 10000;
  bool spectral_floor = true;
  std::optional<double> wr_r;
  Normalization normalization = Normalization::exact_variance;
  DistanceKind distance_kind = DistanceKind::kolmogorov;
  std::int64_t seeds = 8;
  std::optional<double> target_exponent;
  bool target_log_corrected = false;
  double tolerance = 0.05;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;
};

/// Geometric default grid 2^7..2^14.
std::vector<std::int64_t> default_n_grid();

/// Parses a JSON document. Unknown keys are rejected. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ModelSpec parse_model(const std::string& json_text);

/// Canonical JSON of a model (sorted keys, every field explicit).
std::string model_to_json(const ModelSpec& spec);
std::string config_to_json(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical model JSON.
std::uint64_t spec_hash(const ModelSpec& spec);

/// Parses "64,128,256" or "2^7..2^10" (powers of two, inclusive).
std::vector<std::int64_t> parse_n_grid(const std::string& text);

}  // namespace cltlab
