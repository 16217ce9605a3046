#include "fc/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fc/report.hpp"

namespace fc {

namespace {

// Accuracies are ratios of counts; a value sitting exactly on an inclusive
// threshold must not be lost to rounding in copy_mean - lm_mean.
constexpr double kThresholdSlack = 1e-12;

}  // namespace

LengthEstimate run_rule(const std::vector<std::size_t>& lengths, const std::vector<std::optional<double>>& values,
                        double threshold, bool interpolate) {
  if (lengths.empty() || lengths.size() != values.size())
    throw std::invalid_argument("run rule needs one value per grid length");
  LengthEstimate est;
  std::optional<std::size_t> first;
  std::size_t last = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!values[k]) {
      est.indeterminate = true;
      return est;
    }
    const bool holds = *values[k] >= threshold - kThresholdSlack;
    if (!first) {
      if (holds) first = last = k;
      continue;
    }
    if (!holds) break;
    last = k;
  }
  if (!first) return est;
  est.length = lengths[last];
  est.censored = last + 1 == lengths.size();
  if (interpolate && !est.censored) {
    const double v0 = *values[last];
    const double v1 = *values[last + 1];
    const double x0 = static_cast<double>(lengths[last]);
    const double x1 = static_cast<double>(lengths[last + 1]);
    est.interpolated = v0 > v1 ? x0 + (x1 - x0) * (v0 - threshold) / (v0 - v1) : x0;
  }
  return est;
}

namespace {

std::vector<std::size_t> grid_of(const ForgettingCurve& curve) {
  if (curve.points.empty()) throw std::invalid_argument("curve has no points");
  std::vector<std::size_t> out;
  for (const auto& p : curve.points) out.push_back(p.grid_length);
  return out;
}

template <typename F>
std::vector<std::optional<double>> values_of(const ForgettingCurve& curve, F f) {
  std::vector<std::optional<double>> out;
  for (const auto& p : curve.points) out.push_back(p.failed ? std::nullopt : std::optional<double>(f(p)));
  return out;
}

// Points that satisfy the predicate again after the run ended.
std::vector<std::size_t> dips(const ForgettingCurve& curve, const LengthEstimate& est,
                              const std::vector<std::optional<double>>& values, double threshold) {
  std::vector<std::size_t> out;
  if (est.indeterminate || est.censored || est.length == 0) return out;
  bool past = false;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (curve.points[k].grid_length == est.length) {
      past = true;
      continue;
    }
    if (past && values[k] && *values[k] >= threshold - kThresholdSlack) out.push_back(curve.points[k].grid_length);
  }
  // The first entry after the run is a violation by construction, so any hit is a re-attainment.
  return out;
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

}  // namespace

LengthEstimate fine_length(const ForgettingCurve& curve, double threshold, bool interpolate) {
  return run_rule(grid_of(curve), values_of(curve, [](const CurvePoint& p) { return p.copy_mean; }), threshold,
                  interpolate);
}

LengthEstimate coarse_length(const ForgettingCurve& curve, double margin, bool interpolate) {
  return run_rule(grid_of(curve), values_of(curve, [](const CurvePoint& p) { return p.copy_mean - p.lm_mean; }),
                  margin, interpolate);
}

MemoryLengths extract_memory_lengths(const ForgettingCurve& curve, const ExtractionOptions& options) {
  MemoryLengths m;
  m.options = options;
  m.config_hash = config_hash(curve.config);
  m.fine = fine_length(curve, options.fine_threshold, options.interpolate);
  m.coarse = coarse_length(curve, options.coarse_margin, options.interpolate);

  if (m.fine.indeterminate) m.warnings.push_back("fine length indeterminate: failed grid point inside the candidate run");
  if (m.coarse.indeterminate)
    m.warnings.push_back("coarse length indeterminate: failed grid point inside the candidate run");
  if (!m.fine.indeterminate && !m.coarse.indeterminate && reported_length(m.fine) > reported_length(m.coarse))
    m.warnings.push_back("fine length " + std::to_string(reported_length(m.fine)) + " exceeds coarse length " +
                         std::to_string(reported_length(m.coarse)));

  const auto copy = values_of(curve, [](const CurvePoint& p) { return p.copy_mean; });
  const auto diff = values_of(curve, [](const CurvePoint& p) { return p.copy_mean - p.lm_mean; });
  if (auto d = dips(curve, m.fine, copy, options.fine_threshold); !d.empty())
    m.warnings.push_back("copy accuracy re-attains the fine threshold after the run ended at lengths " + join(d));
  if (auto d = dips(curve, m.coarse, diff, options.coarse_margin); !d.empty())
    m.warnings.push_back("copy-LM gap re-attains the coarse margin after the run ended at lengths " + join(d));
  return m;
}

std::size_t reported_length(const LengthEstimate& estimate) {
  if (estimate.interpolated) return static_cast<std::size_t>(std::floor(*estimate.interpolated));
  return estimate.length;
}

std::string display_length(const LengthEstimate& estimate) {
  if (estimate.indeterminate) return "indeterminate";
  const std::string n = std::to_string(reported_length(estimate));
  return estimate.censored ? ">" + n : n;
}

}  // namespace fc
