// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <ostream>
#include <sstream>
#include <thread>

#include "cltlab/io.hpp"
#include "cltlab/numerics.hpp"
#include "cltlab/parallel.hpp"

namespace cltlab {

int default_threads() {
  if (const char* env = std::getenv("CLTLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 4096) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {
constexpr std::int64_t kBlock = 4096;
}  // namespace

std::vector<double> simulate_sums(const PathSampler& sampler, std::int64_t replicates,
                                  std::uint64_t master_seed, int threads) {
  std::vector<double> out(static_cast<std::size_t>(replicates));
  parallel_blocks(replicates, kBlock, threads, [&](std::int64_t, std::int64_t b, std::int64_t e) {
    for (std::int64_t r = b; r < e; ++r) {
      out[static_cast<std::size_t>(r)] = sampler.sum({master_seed, static_cast<std::uint64_t>(r)});
    }
  });
  return out;
}

std::vector<double> simulate_paths(const PathSampler& sampler, std::int64_t replicates,
                                   std::uint64_t master_seed, int threads) {
  const auto n = static_cast<std::size_t>(sampler.n());
  std::vector<double> out(static_cast<std::size_t>(replicates) * n);
  parallel_blocks(replicates, 256, threads, [&](std::int64_t, std::int64_t b, std::int64_t e) {
    for (std::int64_t r = b; r < e; ++r) {
      const Path path = sampler.path({master_seed, static_cast<std::uint64_t>(r)});
      std::copy(path.xi.begin(), path.xi.end(),
                out.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r) * n));
    }
  });
  return out;
}

double normalization_scale(const ModelSpec& spec, Normalization norm) {
  if (norm == Normalization::long_run && spec.family == Family::linear_statistic) {
    double sq = 0.0;
    for (double a : spec.coefficients.materialize(spec.n)) sq += a * a;
    return std::sqrt(spec.base.long_run_variance() * sq);
  }
  return std::sqrt(exact_moments(spec).v_n);
}

DistanceRow distance_row(const std::string& model_id, const ModelSpec& spec,
                         std::span<const double> sums, std::uint64_t master_seed,
                         Normalization norm, std::optional<double> wr_r) {
  DistanceRow row;
  row.model_id = model_id;
  row.n = spec.n;
  row.p = spec.p;
  row.replicates = static_cast<std::int64_t>(sums.size());
  row.v_n = exact_moments(spec).v_n;
  row.scale = normalization_scale(spec, norm);
  row.master_seed = master_seed;
  std::vector<double> normalized(sums.begin(), sums.end());
  for (double& x : normalized) x /= row.scale;
  row.report = distance_report(normalized, wr_r);
  row.be_transfer = be_transfer(row.report.w1, 3.0);
  return row;
}

DistanceRow measure_distance(const std::string& model_id, const ModelSpec& spec,
                             std::int64_t replicates, std::uint64_t master_seed, int threads,
                             Normalization norm, std::optional<double> wr_r) {
  const PathSampler sampler(spec);
  const auto sums = simulate_sums(sampler, replicates, master_seed, threads);
  return distance_row(model_id, spec, sums, master_seed, norm, wr_r);
}

void write_distance_csv_header(std::ostream& out) {
  out << "model_id,n,p,replicates,kolmogorov,kolmogorov_se,w1,w1_se,wr_r,wr_value,"
         "wr_is_upper_bound,v_n,scale,be_transfer,master_seed\n";
}

void write_distance_csv_row(std::ostream& out, const DistanceRow& row) {
  const auto& r = row.report;
  out << csv_field(row.model_id) << ',' << row.n << ',' << format_double(row.p) << ','
      << row.replicates << ',' << format_double(r.kolmogorov) << ','
      << format_double(r.mc_se_kolmogorov) << ',' << format_double(r.w1) << ','
      << format_double(r.mc_se_w1) << ',';
  if (r.wr) {
    out << format_double(r.wr->r) << ',' << format_double(r.wr->value) << ','
        << (r.wr->is_upper_bound ? "true" : "false");
  } else {
    out << ",,";
  }
  out << ',' << format_double(row.v_n) << ',' << format_double(row.scale) << ','
      << format_double(row.be_transfer) << ',' << row.master_seed << '\n';
}

std::string distance_csv(std::span<const DistanceRow> rows) {
  std::ostringstream out;
  write_distance_csv_header(out);
  for (const auto& row : rows) write_distance_csv_row(out, row);
  return out.str();
}

std::vector<DistanceRow> parse_distance_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("distance CSV is empty");
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("distance CSV lacks column '" + name + "'");
  };
  const std::size_t c_model = column("model_id"), c_n = column("n"), c_p = column("p"),
                    c_r = column("replicates"), c_k = column("kolmogorov"),
                    c_kse = column("kolmogorov_se"), c_w = column("w1"), c_wse = column("w1_se");
  auto optional_column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto c_v = optional_column("v_n"), c_s = optional_column("scale"),
             c_seed = optional_column("master_seed"), c_be = optional_column("be_transfer"),
             c_wr = optional_column("wr_r"), c_wv = optional_column("wr_value"),
             c_wu = optional_column("wr_is_upper_bound");
  std::vector<DistanceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw ConfigError("distance CSV row has the wrong arity");
    try {
      DistanceRow row;
      row.model_id = f[c_model];
      row.n = std::stoll(f[c_n]);
      row.p = parse_double(f[c_p]);
      row.replicates = std::stoll(f[c_r]);
      row.report.kolmogorov = parse_double(f[c_k]);
      row.report.mc_se_kolmogorov = parse_double(f[c_kse]);
      row.report.w1 = parse_double(f[c_w]);
      row.report.mc_se_w1 = parse_double(f[c_wse]);
      if (c_v) row.v_n = parse_double(f[*c_v]);
      row.scale = c_s ? parse_double(f[*c_s]) : 1.0;
      if (c_seed) row.master_seed = std::stoull(f[*c_seed]);
      row.be_transfer = c_be ? parse_double(f[*c_be]) : be_transfer(row.report.w1, 3.0);
      if (c_wr && c_wv && !f[*c_wr].empty()) {
        row.report.wr = WrEstimate{parse_double(f[*c_wr]), parse_double(f[*c_wv]),
                                   c_wu && f[*c_wu] == "true"};
      }
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw ConfigError("distance CSV has a malformed number in: " + line);
    }
  }
  return rows;
}

double row_distance(const DistanceRow& row, DistanceKind kind) {
  switch (kind) {
    case DistanceKind::kolmogorov: return row.report.kolmogorov;
    case DistanceKind::w1: return row.report.w1;
    case DistanceKind::w1_normalized: return row.report.w1 * row.scale;
  }
  return 0.0;
}

double row_distance_se(const DistanceRow& row, DistanceKind kind) {
  switch (kind) {
    case DistanceKind::kolmogorov: return row.report.mc_se_kolmogorov;
    case DistanceKind::w1: return row.report.mc_se_w1;
    case DistanceKind::w1_normalized: return row.report.mc_se_w1 * row.scale;
  }
  return 0.0;
}

RateSeries rate_series(std::span<const DistanceRow> rows, DistanceKind kind) {
  RateSeries s;
  s.kind = kind;
  if (!rows.empty()) s.model_id = rows.front().model_id;
  for (const auto& row : rows)
    s.points.push_back({row.n, row.v_n, row_distance(row, kind), row_distance_se(row, kind)});
  return s;
}

void write_ratefit_csv_header(std::ostream& out) {
  out << "model_id,distance_kind,exponent,intercept,ci_halfwidth,log_corrected_exponent,"
         "log_corrected_ci_halfwidth,target_exponent,target_log_corrected,verdict,points,seeds,"
         "note\n";
}

void write_ratefit_csv_row(std::ostream& out, const std::string& model_id, DistanceKind kind,
                           const RateFitResult& r) {
  out << csv_field(model_id) << ',' << to_string(kind) << ',' << format_double(r.exponent) << ','
      << format_double(r.intercept) << ',' << format_double(r.ci_halfwidth) << ','
      << format_double(r.log_corrected_exponent) << ','
      << format_double(r.log_corrected_ci_halfwidth) << ',' << format_double(r.target_exponent)
      << ',' << (r.target_log_corrected ? "true" : "false") << ',' << to_string(r.verdict) << ','
      << r.points_used << ',' << r.seeds << ',' << csv_field(r.note) << '\n';
}

CeCheckRow verify_ce_row(std::int64_t n, double p, std::int64_t replicates,
                         std::int64_t moment_replicates, std::uint64_t master_seed, int threads) {
  ModelSpec spec;
  spec.family = Family::ce_lowerbound;
  spec.n = n;
  spec.p = p;
  spec.validate();
  const double rate = std::pow(static_cast<double>(n), -(p - 2.0) / (2.0 * p - 2.0));

  CeCheckRow row;
  row.n = n;
  row.p = p;
  row.replicates = replicates;
  const PathSampler sampler(spec);
  const auto sums = simulate_sums(sampler, replicates, master_seed, threads);
  std::int64_t zeros = 0;
  for (double s : sums) zeros += s == 0.0 ? 1 : 0;
  const double rd = static_cast<double>(replicates);
  row.atom = static_cast<double>(zeros) / rd;
  row.atom_se = std::sqrt(row.atom * (1.0 - row.atom) / rd);
  row.atom_threshold = 0.12 * rate;
  row.atom_ok = row.atom >= row.atom_threshold - 3.0 * row.atom_se;

  std::vector<double> normalized(sums);
  const double scale = std::sqrt(static_cast<double>(n));
  for (double& x : normalized) x /= scale;
  const EmpiricalSample sample(std::move(normalized));
  row.kolmogorov = kolmogorov_vs_normal(sample);
  row.kolmogorov_se = dkw_kolmogorov_se(sample.replicates());
  row.kolmogorov_threshold = 0.06 * rate;
  row.kolmogorov_ok = row.kolmogorov >= row.kolmogorov_threshold - 3.0 * row.kolmogorov_se;

  // Per-index |X_k|^p means over full paths; a distinct stream range keeps
  // them independent of the sums above.
  const auto count = static_cast<std::size_t>(n);
  const std::int64_t blocks = (moment_replicates + 1023) / 1024;
  std::vector<std::vector<double>> s1(static_cast<std::size_t>(blocks)), s2(s1.size());
  const std::uint64_t moment_seed = derive_master_seed(master_seed, 1);
  parallel_blocks(moment_replicates, 1024, threads,
                  [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
                    std::vector<double> a(count, 0.0), q(count, 0.0);
                    for (std::int64_t r = begin; r < end; ++r) {
                      const CEPath path =
                          ce_generate(n, p, {moment_seed, static_cast<std::uint64_t>(r)});
                      for (std::size_t k = 0; k < count; ++k) {
                        const double v = std::pow(std::fabs(path.x[k]), p);
                        a[k] += v;
                        q[k] += v * v;
                      }
                    }
                    s1[static_cast<std::size_t>(b)] = std::move(a);
                    s2[static_cast<std::size_t>(b)] = std::move(q);
                  });
  std::vector<double> mean(count, 0.0), sq(count, 0.0);
  for (std::size_t b = 0; b < s1.size(); ++b) {
    for (std::size_t k = 0; k < count; ++k) {
      mean[k] += s1[b][k];
      sq[k] += s2[b][k];
    }
  }
  const double md = static_cast<double>(moment_replicates);
  row.moment = -1.0;
  row.moment_cap = normal_abs_moment(p) + std::pow(5.0, p - 2.0);
  row.moment_ok = true;
  for (std::size_t k = 0; k < count; ++k) {
    const double m = mean[k] / md;
    const double se = std::sqrt(std::max(0.0, sq[k] / md - m * m) / (md - 1.0));
    row.moment_ok = row.moment_ok && m <= row.moment_cap + 3.0 * se;
    if (m > row.moment) {
      row.moment = m;
      row.moment_se = se;
    }
  }
  return row;
}

void write_ce_csv_header(std::ostream& out) {
  out << "n,p,replicates,atom,atom_se,atom_threshold,atom_ok,kolmogorov,kolmogorov_se,"
         "kolmogorov_threshold,kolmogorov_ok,moment,moment_se,moment_cap,moment_ok\n";
}

void write_ce_csv_row(std::ostream& out, const CeCheckRow& r) {
  auto flag = [](bool b) { return b ? "pass" : "fail"; };
  out << r.n << ',' << format_double(r.p) << ',' << r.replicates << ',' << format_double(r.atom)
      << ',' << format_double(r.atom_se) << ',' << format_double(r.atom_threshold) << ','
      << flag(r.atom_ok) << ',' << format_double(r.kolmogorov) << ','
      << format_double(r.kolmogorov_se) << ',' << format_double(r.kolmogorov_threshold) << ','
      << flag(r.kolmogorov_ok) << ',' << format_double(r.moment) << ','
      << format_double(r.moment_se) << ',' << format_double(r.moment_cap) << ','
      << flag(r.moment_ok) << '\n';
}

}  // namespace cltlab
