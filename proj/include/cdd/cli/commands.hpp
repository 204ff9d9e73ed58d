#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

#include "cdd/util/json_io.hpp"

namespace cdd {

// Set by the SIGINT handler; campaigns stop scheduling new trials and
// persist what they have.
std::atomic<bool>& interrupt_flag();

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitUsage = 2,
  kExitCheckFailed = 3,
  kExitInterrupted = 130,
};

// Parses and runs one command line. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Wire-protocol conformance probes against one provider endpoint.
std::vector<CheckResult> serve_check(const std::string& endpoint);

}  // namespace cdd
