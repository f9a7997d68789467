#pragma once

#include <exception>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpnls/config.hpp"

namespace qpnls {

// 0 success, 2 validation error, 3 numerical failure, 4 resource cap, 1 anything else.
int exit_code_for(const std::exception& e);

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> artifacts;  // file names relative to the output directory
  nlohmann::json summary;              // mode-specific headline numbers
  nlohmann::json error;                // null on success
};

// Runs the configured pipeline, writes its artifacts plus config.resolved.toml and
// manifest.json into cfg.output.directory. Never throws for module failures;
// they are reported through the exit code and the manifest.
RunResult run(const RunConfig& cfg, std::ostream& log);

// Runs f(0), ..., f(n-1) on up to `threads` workers. Rethrows the exception of
// the smallest failing index after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& f);

}  // namespace qpnls
