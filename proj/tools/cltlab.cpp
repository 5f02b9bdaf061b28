// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line runner: simulate, distance, bounds, ratefit, verify-ce.

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cltlab/bounds.hpp"
#include "cltlab/config.hpp"
#include "cltlab/experiment.hpp"
#include "cltlab/io.hpp"
#include "cltlab/numerics.hpp"
#include "cltlab/parallel.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cltlab;

namespace {

enum ExitCode { kPass = 0, kCheckFailure = 1, kConfigFailure = 2, kIoFailure = 3 };

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> reps;
  std::string out;
  std::string model;
  std::string n_grid;
  std::optional<double> p;
  std::string a;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--seed", f.seed, "master seed (u64)");
  cmd->add_option("--reps", f.reps, "replicates per point");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--model", f.model, "model family tag");
  cmd->add_option("--n-grid", f.n_grid, "n values: 64,128,256 or 2^7..2^10");
  cmd->add_option("--p", f.p, "moment order p");
  cmd->add_option("--a", f.a, "smoothing level a >= 1, or auto");
}

ExperimentConfig load_config(const CommonFlags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) {
    c = parse_config(read_text_file(f.config));
  } else {
    c.model.family = Family::gaussian_iid;
    c.model_id.clear();
    c.n_grid = default_n_grid();
  }
  if (!f.model.empty()) {
    c.model.family = family_from_string(f.model);
    if (f.config.empty() || c.model_id.empty()) c.model_id = f.model;
  }
  if (c.model_id.empty()) c.model_id = to_string(c.model.family);
  if (!f.n_grid.empty()) c.n_grid = parse_n_grid(f.n_grid);
  if (f.reps) c.replicates = *f.reps;
  if (f.seed) c.master_seed = *f.seed;
  if (!f.out.empty()) c.outputs = f.out;
  if (f.p) c.model.p = *f.p;
  if (!f.a.empty()) {
    if (f.a == "auto") {
      c.a.reset();
    } else {
      try {
        c.a = parse_double(f.a);
      } catch (const std::exception&) {
        throw ConfigError("--a must be a number or auto");
      }
    }
  }
  if (c.n_grid.empty()) throw ConfigError("n_grid must not be empty");
  c.model.n = c.n_grid.front();
  c.validate();
  return c;
}

nlohmann::json manifest_base(const ExperimentConfig& c, const std::string& command) {
  nlohmann::json m;
  m["tool"] = "cltlab";
  m["version"] = kVersion;
  m["command"] = command;
  m["config_hash"] = hex64(fnv1a64(config_to_json(c)));
  m["model_id"] = c.model_id;
  m["master_seed"] = c.master_seed;
  m["replicates"] = c.replicates;
  m["stream_ids"] = "0.." + std::to_string(c.replicates - 1) + " (replicate index)";
  m["config"] = nlohmann::json::parse(config_to_json(c));
  return m;
}

void write_manifest(const fs::path& dir, const std::string& command, nlohmann::json m) {
  write_text_file(dir / (command + "_manifest.json"), m.dump(2) + "\n");
}

int cmd_simulate(const ExperimentConfig& c) {
  const fs::path dir(c.outputs);
  ensure_directory(dir);
  const int threads = default_threads();
  auto manifest = manifest_base(c, "simulate");
  nlohmann::json files = nlohmann::json::array();
  for (auto n : c.n_grid) {
    const ModelSpec spec = c.model.with_n(n);
    const PathSampler sampler(spec);
    const auto data = simulate_paths(sampler, c.replicates, c.master_seed, threads);
    const std::string name = "paths_n" + std::to_string(n) + ".bin";
    const PathBatchHeader header{spec_hash(spec), c.master_seed, static_cast<std::uint64_t>(n),
                                 static_cast<std::uint64_t>(c.replicates)};
    write_path_batch(dir / name, header, data);
    files.push_back({{"file", name},
                     {"n", n},
                     {"spec_hash", hex64(header.spec_hash)},
                     {"bytes", kPathBatchHeaderBytes + data.size() * sizeof(double)},
                     {"data_hash", hex64(fnv1a64(read_text_file(dir / name)))}});
    std::cout << "wrote " << (dir / name).string() << " (" << c.replicates << " x " << n << ")\n";
  }
  manifest["files"] = files;
  write_manifest(dir, "simulate", manifest);
  return kPass;
}

std::vector<double> sums_from_batch(const fs::path& file, const ModelSpec& spec,
                                    const ExperimentConfig& c) {
  std::vector<double> data;
  const PathBatchHeader h = read_path_batch(file, &data);
  if (h.spec_hash != spec_hash(spec) || h.master_seed != c.master_seed ||
      h.n != static_cast<std::uint64_t>(spec.n)) {
    throw ConfigError("path batch '" + file.string() + "' was produced by a different config");
  }
  std::vector<double> sums(h.replicates, 0.0);
  for (std::size_t r = 0; r < h.replicates; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < h.n; ++k) s += data[r * h.n + k];
    sums[r] = s;
  }
  return sums;
}

int cmd_distance(const ExperimentConfig& c, const std::string& batches) {
  const fs::path dir(c.outputs);
  ensure_directory(dir);
  const int threads = default_threads();
  std::vector<DistanceRow> rows;
  for (auto n : c.n_grid) {
    const ModelSpec spec = c.model.with_n(n);
    if (!batches.empty()) {
      const fs::path file = fs::path(batches) / ("paths_n" + std::to_string(n) + ".bin");
      if (!fs::exists(file)) {
        throw IoError("missing path batch '" + file.string() + "'; run simulate first");
      }
      const auto sums = sums_from_batch(file, spec, c);
      rows.push_back(distance_row(c.model_id, spec, sums, c.master_seed, c.normalization, c.wr_r));
    } else {
      rows.push_back(measure_distance(c.model_id, spec, c.replicates, c.master_seed, threads,
                                      c.normalization, c.wr_r));
    }
    const auto& r = rows.back();
    std::cout << std::setw(8) << n << "  kolmogorov " << std::setw(12) << r.report.kolmogorov
              << " +- " << std::setw(10) << r.report.mc_se_kolmogorov << "  w1 " << std::setw(12)
              << r.report.w1 << " +- " << r.report.mc_se_w1 << '\n';
  }
  write_text_file(dir / "distance.csv", distance_csv(rows));
  auto manifest = manifest_base(c, "distance");
  nlohmann::json hashes = nlohmann::json::array();
  for (auto n : c.n_grid) hashes.push_back({{"n", n}, {"spec_hash", hex64(spec_hash(c.model.with_n(n)))}});
  manifest["rows"] = hashes;
  manifest["source"] = batches.empty() ? "inline" : "batches";
  write_manifest(dir, "distance", manifest);
  return kPass;
}

std::vector<std::string> default_tags(const ModelSpec& spec) {
  switch (spec.family) {
    case Family::linear_statistic: return {"linear_bnp"};
    case Family::sequential_maps: return {"sequential"};
    case Family::rho_mixing_chain:
      if (spec.chain.view == ChainView::values) return {"rho_mixing"};
      [[fallthrough]];
    default: return {"theorem1", "corollary_w1", "berry_esseen", "heyde_brown"};
  }
}

int cmd_bounds(const ExperimentConfig& c) {
  const fs::path dir(c.outputs);
  ensure_directory(dir);
  const auto tags = c.bound_requests.empty() ? default_tags(c.model) : c.bound_requests;
  std::ostringstream csv;
  csv << "model_id,n,";
  write_breakdown_csv_header(csv);
  for (auto n : c.n_grid) {
    const ModelSpec spec = c.model.with_n(n);
    for (const auto& tag : tags) {
      BoundRequest req;
      req.tag = tag;
      req.p = spec.p;
      req.r = c.r;
      req.a = c.a;
      req.spectral_floor = c.spectral_floor;
      req.theorem1.mode = c.constants_mode;
      req.theorem1.kappa = c.kappa;
      req.theorem1.psi = c.psi_mode;
      req.theorem1.mc = {c.u_replicates, c.master_seed, default_threads()};
      const BoundBreakdown b = evaluate_bound(req, spec);
      std::cout << "n = " << n << "  ";
      print_breakdown_table(std::cout, b);
      std::ostringstream rows;
      write_breakdown_csv(rows, b);
      std::istringstream lines(rows.str());
      std::string line;
      while (std::getline(lines, line)) csv << csv_field(c.model_id) << ',' << n << ',' << line << '\n';
    }
  }
  write_text_file(dir / "bounds.csv", csv.str());
  write_manifest(dir, "bounds", manifest_base(c, "bounds"));
  return kPass;
}

struct Target {
  double exponent;
  bool log_corrected;
};

Target default_target(const ExperimentConfig& c) {
  if (c.target_exponent) return {*c.target_exponent, c.target_log_corrected};
  const double p = c.model.p;
  switch (c.model.family) {
    case Family::ce_lowerbound: return {-(p - 2.0) / (2.0 * p - 2.0), false};
    case Family::gaussian_iid:
    case Family::rademacher_iid: return {berry_esseen_exponent(std::min(p, 3.0)), false};
    case Family::linear_statistic:
      return p == 3.0 ? Target{-0.5, true} : Target{-(p - 2.0) / 2.0, false};
    default: return {-0.5, true};
  }
}

int cmd_ratefit(const ExperimentConfig& c, const std::string& input) {
  const fs::path dir(c.outputs);
  ensure_directory(dir);
  const Target target = default_target(c);
  const FitOptions options{target.exponent, c.tolerance, target.log_corrected, 2.0};
  RateFitResult result;
  if (!input.empty()) {
    const auto rows = parse_distance_csv(read_text_file(input));
    result = fit(rate_series(rows, c.distance_kind), options);
  } else {
    const int threads = default_threads();
    std::vector<RateSeries> per_seed;
    std::vector<DistanceRow> all_rows;
    for (std::int64_t s = 0; s < c.seeds; ++s) {
      const std::uint64_t seed = derive_master_seed(c.master_seed, static_cast<std::uint64_t>(s));
      std::vector<DistanceRow> rows;
      for (auto n : c.n_grid) {
        rows.push_back(measure_distance(c.model_id, c.model.with_n(n), c.replicates, seed,
                                        threads, c.normalization, c.wr_r));
      }
      per_seed.push_back(rate_series(rows, c.distance_kind));
      all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    }
    RateSeries pooled = per_seed.front();
    for (std::size_t i = 0; i < pooled.points.size(); ++i) {
      double mean = 0.0, ss = 0.0;
      for (const auto& s : per_seed) mean += s.points[i].distance;
      mean /= static_cast<double>(per_seed.size());
      for (const auto& s : per_seed) ss += std::pow(s.points[i].distance - mean, 2);
      pooled.points[i].distance = mean;
      pooled.points[i].se = per_seed.size() > 1
                                ? std::sqrt(ss / static_cast<double>(per_seed.size() - 1) /
                                            static_cast<double>(per_seed.size()))
                                : per_seed.front().points[i].se;
    }
    result = fit(pooled, per_seed, options);
    write_text_file(dir / "ratefit_distances.csv", distance_csv(all_rows));
  }
  std::ostringstream csv;
  write_ratefit_csv_header(csv);
  write_ratefit_csv_row(csv, c.model_id, c.distance_kind, result);
  write_text_file(dir / "ratefit.csv", csv.str());
  write_manifest(dir, "ratefit", manifest_base(c, "ratefit"));
  std::cout << "exponent " << result.exponent << " +- " << result.ci_halfwidth
            << "  log-corrected " << result.log_corrected_exponent << " +- "
            << result.log_corrected_ci_halfwidth << "  target " << result.target_exponent
            << (result.target_log_corrected ? " (log-corrected)" : "") << "  verdict "
            << to_string(result.verdict) << '\n';
  return kPass;
}

int cmd_verify_ce(const ExperimentConfig& c, std::int64_t moment_reps) {
  const fs::path dir(c.outputs);
  ensure_directory(dir);
  const int threads = default_threads();
  std::ostringstream csv;
  write_ce_csv_header(csv);
  bool ok = true;
  std::cout << std::setw(7) << "n" << std::setw(12) << "atom" << std::setw(12) << ">= thr"
            << std::setw(12) << "kolmogorov" << std::setw(12) << ">= thr" << std::setw(12)
            << "moment" << std::setw(12) << "<= cap" << "  result\n";
  for (auto n : c.n_grid) {
    const CeCheckRow row =
        verify_ce_row(n, c.model.p, c.replicates, std::min(moment_reps, c.replicates),
                      c.master_seed, threads);
    write_ce_csv_row(csv, row);
    ok = ok && row.all_ok();
    std::cout << std::setw(7) << n << std::setw(12) << row.atom << std::setw(12)
              << row.atom_threshold << std::setw(12) << row.kolmogorov << std::setw(12)
              << row.kolmogorov_threshold << std::setw(12) << row.moment << std::setw(12)
              << row.moment_cap << "  " << (row.all_ok() ? "pass" : "FAIL") << '\n';
  }
  write_text_file(dir / "verify_ce.csv", csv.str());
  write_manifest(dir, "verify_ce", manifest_base(c, "verify-ce"));
  return ok ? kPass : kCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cltlab: Monte Carlo rates in the martingale central limit theorem"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonFlags sim_flags, dist_flags, bound_flags, rate_flags, ce_flags;
  std::string batches, input;
  std::int64_t moment_reps = 20000;
  auto* sim = app.add_subcommand("simulate", "write path batch files and a manifest");
  add_common(sim, sim_flags);
  auto* dist = app.add_subcommand("distance", "Kolmogorov and W1 distances per n");
  add_common(dist, dist_flags);
  dist->add_option("--batches", batches, "read sums from path batches in this directory");
  auto* bnd = app.add_subcommand("bounds", "evaluate bound breakdowns per n");
  add_common(bnd, bound_flags);
  auto* rate = app.add_subcommand("ratefit", "fit convergence exponents");
  add_common(rate, rate_flags);
  rate->add_option("--input", input, "fit a distance CSV instead of simulating");
  auto* ce = app.add_subcommand("verify-ce", "check the lower-bound construction");
  add_common(ce, ce_flags);
  ce->add_option("--moment-reps", moment_reps, "full paths for the moment check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigFailure;
  }

  try {
    if (*sim) return cmd_simulate(load_config(sim_flags));
    if (*dist) return cmd_distance(load_config(dist_flags), batches);
    if (*bnd) return cmd_bounds(load_config(bound_flags));
    if (*rate) return cmd_ratefit(load_config(rate_flags), input);
    if (*ce) {
      CommonFlags flags = ce_flags;
      flags.model = "ce_lowerbound";
      ExperimentConfig c;
      if (flags.config.empty() && flags.n_grid.empty()) flags.n_grid = "64,256,1024";
      c = load_config(flags);
      return cmd_verify_ce(c, moment_reps);
    }
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const DomainError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const CapabilityError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailure;
  }
  return kConfigFailure;
}
