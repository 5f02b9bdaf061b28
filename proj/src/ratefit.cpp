// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/ratefit.hpp"

#include <algorithm>
#include <cmath>
#include <boost/math/distributions/students_t.hpp>

#include "cltlab/numerics.hpp"

namespace cltlab {

std::string to_string(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::kolmogorov: return "kolmogorov";
    case DistanceKind::w1: return "w1";
    case DistanceKind::w1_normalized: return "w1_normalized";
  }
  return "kolmogorov";
}

DistanceKind distance_kind_from_string(const std::string& tag) {
  for (auto k : {DistanceKind::kolmogorov, DistanceKind::w1, DistanceKind::w1_normalized})
    if (to_string(k) == tag) return k;
  throw ConfigError("unknown distance kind '" + tag + "'");
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::consistent: return "consistent";
    case Verdict::inconsistent: return "inconsistent";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

void RateSeries::validate() const {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].n > points[i - 1].n)) {
      throw DomainError("rate series: n must be strictly increasing");
    }
  }
}

namespace {

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  std::size_t points = 0;
};

Line weighted_ls(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& w) {
  Line line;
  line.points = x.size();
  if (x.size() < 2) return line;
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) return line;
  line.slope = sxy / sxx;
  line.intercept = my - line.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - line.intercept - line.slope * x[i];
      rss += w[i] * e * e;
    }
    const double sigma2 = rss / static_cast<double>(x.size() - 2);
    line.slope_se = std::sqrt(sigma2 / sxx);
  }
  return line;
}

double t_quantile(std::size_t dof) {
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.975);
}

}  // namespace

Slopes fit_slopes(const RateSeries& series) {
  series.validate();
  bool weighted = true;
  for (const auto& pt : series.points)
    if (!(pt.se > 0.0)) weighted = false;
  std::vector<double> x, y, w, lx, ly, lw;
  for (const auto& pt : series.points) {
    if (!(pt.distance > 0.0)) continue;
    const double ln = std::log(static_cast<double>(pt.n));
    const double weight = weighted ? (pt.distance / pt.se) * (pt.distance / pt.se) : 1.0;
    x.push_back(ln);
    y.push_back(std::log(pt.distance));
    w.push_back(weight);
    if (ln > 1.0) {
      lx.push_back(ln);
      ly.push_back(std::log(pt.distance) - std::log(ln));
      lw.push_back(weight);
    }
  }
  const Line raw = weighted_ls(x, y, w);
  const Line corrected = weighted_ls(lx, ly, lw);
  return {raw.slope, raw.intercept, raw.slope_se, corrected.slope, corrected.slope_se,
          raw.points, corrected.points};
}

namespace {

RateFitResult assemble(const RateSeries& series, const Slopes& s, const FitOptions& options) {
  RateFitResult r;
  r.exponent = s.exponent;
  r.intercept = s.intercept;
  r.log_corrected_exponent = s.log_corrected;
  r.target_exponent = options.target;
  r.target_log_corrected = options.target_log_corrected;
  r.points_used = s.points;
  std::size_t dropped = 0;
  for (const auto& pt : series.points)
    if (!(pt.distance > 0.0)) ++dropped;
  if (dropped > 0) r.note += std::to_string(dropped) + " nonpositive distance(s) dropped; ";
  return r;
}

void decide(RateFitResult& r, const RateSeries& series, const FitOptions& options) {
  double lo = INFINITY, hi = 0.0;
  for (const auto& pt : series.points) {
    if (!(pt.distance > 0.0)) continue;
    lo = std::min(lo, static_cast<double>(pt.n));
    hi = std::max(hi, static_cast<double>(pt.n));
  }
  const double decades = r.points_used > 0 ? std::log10(hi / lo) : 0.0;
  if (r.points_used < 4) {
    r.verdict = Verdict::inconclusive;
    r.note += "fewer than 4 points";
    return;
  }
  if (decades + 1e-12 < options.min_decades) {
    r.verdict = Verdict::inconclusive;
    r.note += "n spans fewer than " + std::to_string(options.min_decades).substr(0, 4) +
              " decades";
    return;
  }
  const double estimate = options.target_log_corrected ? r.log_corrected_exponent : r.exponent;
  const double ci = options.target_log_corrected ? r.log_corrected_ci_halfwidth : r.ci_halfwidth;
  r.verdict = std::fabs(estimate - options.target) <= std::max(ci, options.tolerance)
                  ? Verdict::consistent
                  : Verdict::inconsistent;
}

}  // namespace

RateFitResult fit(const RateSeries& series, const FitOptions& options) {
  const Slopes s = fit_slopes(series);
  RateFitResult r = assemble(series, s, options);
  if (s.points > 2) r.ci_halfwidth = t_quantile(s.points - 2) * s.exponent_se;
  if (s.log_points > 2) r.log_corrected_ci_halfwidth = t_quantile(s.log_points - 2) * s.log_corrected_se;
  r.note += "ci from regression residuals; ";
  decide(r, series, options);
  return r;
}

RateFitResult fit(const RateSeries& pooled, std::span<const RateSeries> per_seed,
                  const FitOptions& options) {
  if (per_seed.size() < 2) return fit(pooled, options);
  const Slopes s = fit_slopes(pooled);
  RateFitResult r = assemble(pooled, s, options);
  std::vector<double> raw, corrected;
  for (const auto& series : per_seed) {
    const Slopes one = fit_slopes(series);
    raw.push_back(one.exponent);
    corrected.push_back(one.log_corrected);
  }
  auto halfwidth = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return t_quantile(v.size() - 1) * sd / std::sqrt(static_cast<double>(v.size()));
  };
  r.ci_halfwidth = halfwidth(raw);
  r.log_corrected_ci_halfwidth = halfwidth(corrected);
  r.seeds = per_seed.size();
  r.note += "ci from " + std::to_string(per_seed.size()) + " seed refits; ";
  decide(r, pooled, options);
  return r;
}

EnvelopeCheck envelope_check(const RateSeries& series, std::span<const double> shape,
                             double slack) {
  if (series.points.empty() || shape.size() != series.points.size()) {
    throw DomainError("envelope_check: need one shape value per point");
  }
  EnvelopeCheck out;
  out.constant = series.points.front().distance / shape.front();
  out.holds = true;
  out.worst_margin = -INFINITY;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const auto& pt = series.points[i];
    const double margin = (pt.distance - slack * pt.se) / (out.constant * shape[i]);
    if (margin > out.worst_margin) {
      out.worst_margin = margin;
      out.worst_index = i;
    }
    if (margin > 1.0 + 1e-12) out.holds = false;
  }
  return out;
}

}  // namespace cltlab
