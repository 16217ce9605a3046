#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "fc/evaluator.hpp"
#include "fc/remote_backend.hpp"
#include "fc/report.hpp"

namespace fc {

struct MeasureOptions {
  std::string backend;  // "exec:...", "tcp:host:port" or "oracle:..."
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> irrelevant_corpus;
  std::size_t random_pool = 0;  // tokens; 0 means use the corpus
  std::uint32_t vocab = 32000;
  std::optional<std::filesystem::path> pool_cache;
  SweepConfig sweep;  // max_len 0: the backend's max_context
  bool interpolate = false;
  std::filesystem::path out_dir = ".";
  bool dump_instances = false;
  PlotOptions plot;
  RemoteOptions remote;
  std::string notes;
};

/// corpus -> pool -> sweep -> analysis. Progress lines go to `progress`.
ReportBundle measure(const MeasureOptions& options, std::ostream* progress = nullptr);

/// Writes report.json, curve.csv and curve.svg into `dir`.
void write_artifacts(const ReportBundle& bundle, const std::filesystem::path& dir, const PlotOptions& plot);

/// Runs the fc command line. Returns the process exit code: 0 success,
/// 1 configuration/usage, 2 backend, 3 data.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fc
