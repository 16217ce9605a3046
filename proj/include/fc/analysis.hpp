#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fc/evaluator.hpp"

namespace fc {

inline constexpr double kFineThreshold = 0.99;
inline constexpr double kCoarseMargin = 0.01;

struct LengthEstimate {
  std::size_t length = 0;  // a grid length, or 0 when never attained
  bool censored = false;   // criterion still holds at the last grid point
  bool indeterminate = false;
  std::optional<double> interpolated;  // sub-grid crossing, when requested
};

/// Run rule: skip leading violations, take the first satisfying point, extend
/// through the contiguous satisfying run. A missing value before the run has
/// ended makes the result indeterminate. Thresholds are inclusive.
LengthEstimate run_rule(const std::vector<std::size_t>& lengths, const std::vector<std::optional<double>>& values,
                        double threshold, bool interpolate);

LengthEstimate fine_length(const ForgettingCurve& curve, double threshold = kFineThreshold, bool interpolate = false);
LengthEstimate coarse_length(const ForgettingCurve& curve, double margin = kCoarseMargin, bool interpolate = false);

struct ExtractionOptions {
  double fine_threshold = kFineThreshold;
  double coarse_margin = kCoarseMargin;
  bool interpolate = false;
};

struct MemoryLengths {
  LengthEstimate fine;
  LengthEstimate coarse;
  ExtractionOptions options;
  std::string config_hash;
  std::vector<std::string> warnings;
};

MemoryLengths extract_memory_lengths(const ForgettingCurve& curve, const ExtractionOptions& options = {});

/// Reported length: "1024", ">4096" when censored, "indeterminate".
std::string display_length(const LengthEstimate& estimate);

/// Length as reported: floor of the interpolated crossing when present.
std::size_t reported_length(const LengthEstimate& estimate);

}  // namespace fc
