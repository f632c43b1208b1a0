#pragma once

#include <string>
#include <vector>

#include "volterra/cli/config.hpp"

namespace volterra::cli {

struct RunOptions {
  unsigned threads = 0;  // 0: VOLTERRA_THREADS, then hardware
  bool dry_run = false;
  bool quiet = false;
};

// Group and action, e.g. "kolmo pde".
std::vector<std::string> commands();

// Runs `command` on a parsed config. Returns 0, or 1 after printing the failure to stderr.
// ConfigError propagates (status 2 is decided by the caller).
int execute(const std::string& command, Config& cfg, const RunOptions& opt);

// Whole command line: volterra [flags] <group> <action> | volterra run <manifest>.
int main(int argc, const char* const* argv);

}  // namespace volterra::cli
