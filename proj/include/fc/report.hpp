#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fc/analysis.hpp"
#include "fc/evaluator.hpp"
#include "fc/stats.hpp"
#include "json.hpp"

namespace fc {

inline constexpr const char* kReportSchema = "fc-report-v1";
inline constexpr const char* kToolVersion = "fc 1.0.0";

struct ReportBundle {
  ForgettingCurve curve;
  MemoryLengths analysis;
  std::vector<StatTestResult> stat_tests;
  std::string created_with = kToolVersion;
  std::string notes;
};

/// FNV-1a over the canonical JSON of the result-affecting config fields.
std::string config_hash(const SweepConfig& config);

/// Rounds to the given number of significant decimal digits.
double round_sig(double value, int digits = 9);

nlohmann::json curve_to_json(const ForgettingCurve& curve);
ForgettingCurve curve_from_json(const nlohmann::json& j);
nlohmann::json analysis_to_json(const MemoryLengths& analysis);
nlohmann::json stat_to_json(const StatTestResult& result);

/// Canonical document: sorted keys, 9 significant digits, trailing newline.
std::string to_json(const ReportBundle& bundle);

/// Parses a report; the analysis is re-extracted with the stored options.
/// Throws DataError on schema violations.
ReportBundle bundle_from_json(std::string_view text);
ReportBundle read_report(const std::string& path);

std::string to_csv(const ForgettingCurve& curve);

enum class Palette { paper, colorblind };

struct PlotOptions {
  Palette palette = Palette::paper;
  int width = 760;
  int height = 460;
  std::string title;
};

/// Forgetting-curve figure: mean +/- std bands for copy and LM accuracy over
/// shaded fine (green), coarse (blue) and amnesia (red) regions.
std::string plot_svg(const ForgettingCurve& curve, const MemoryLengths& analysis, const PlotOptions& options = {});

struct ComparisonRow {
  std::size_t grid_length = 0;
  bool complete = true;  // false when any bundle failed at this length
  StatTestResult anova;
  StatTestResult kruskal;
};

struct Comparison {
  std::vector<std::string> labels;  // distinct groups, first-appearance order
  std::vector<ComparisonRow> rows;
  std::string overlay_svg;
};

/// Per grid length, tests whether the bundles' per-repeat LM accuracies differ
/// between label groups. Bundles sharing a label are pooled.
Comparison compare_report(const std::vector<ReportBundle>& bundles, const std::vector<std::string>& labels,
                          const PlotOptions& options = {});

std::string comparison_to_json(const Comparison& comparison);

/// Overlay of every group's pooled copy (solid) and LM (dashed) means.
std::string overlay_svg(const std::vector<ReportBundle>& bundles, const std::vector<std::string>& labels,
                        const PlotOptions& options = {});

}  // namespace fc
