#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fc {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestOptions {
  /// Command that starts `fc serve`, e.g. "/path/to/fc serve"; the wire-path
  /// check is skipped (and reported as failed) when empty.
  std::string serve_command;
  /// Where the determinism check writes its two runs.
  std::filesystem::path scratch_dir;
  std::ostream* log = nullptr;
};

CheckResult check_step_recovery();
CheckResult check_graded_recovery();
CheckResult check_amnesia_baseline();
CheckResult check_paired_alignment();
CheckResult check_statistics_exactness();
CheckResult check_null_calibration();
CheckResult check_determinism(const std::filesystem::path& scratch_dir);
CheckResult check_perplexity_decoupling();
CheckResult check_wire_path(const std::string& serve_command);

std::vector<CheckResult> run_selftest(const SelftestOptions& options);

void print_table(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace fc
