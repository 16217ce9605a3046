#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fc/remote_backend.hpp"
#include "json.hpp"

namespace fc {

// Byte-level protocol conformance. A fixture file holds one case per line:
//
//   {"name": "...", "send": {...request...} | "send_raw": "<line>",
//    "expect": {"ok": bool, "fields": {"<key>": "<type>"}, "len": {"<key>": n | "positions"},
//               "equals": {"<key>": value}, "same_as": "<earlier case>", "logprob": "iff_supported"}}
//
// Inside "send", {"$tokenize": "text"} stands for the backend's ids for that
// text (behind bos when the backend has one) and {"$tail": k} for the last k
// positions of the ids sent in the same request.

struct ConformanceOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<nlohmann::json> load_conformance_fixtures(const std::filesystem::path& path);

/// Runs every case in order over one connection. The first case must be hello.
std::vector<ConformanceOutcome> run_conformance(LineTransport& transport, const std::vector<nlohmann::json>& cases,
                                                std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace fc
