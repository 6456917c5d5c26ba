#pragma once

// Named verification suites over the solver stack.  Each suite runs a family
// of property or study checks and reports one CheckResult per check; the
// acceptance runner and the `verify` subcommand are both thin wrappers over
// run_suite.

#include <string>
#include <vector>

namespace nnflow::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail; // measured numbers, thresholds, counts
  double seconds = 0.0;
};

// suites in acceptance order; "all" expands to every suite
std::vector<std::string> suite_names();

// run one suite by name; throws std::invalid_argument for unknown names
std::vector<CheckResult> run_suite(const std::string& name);

inline bool all_passed(const std::vector<CheckResult>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return true;
}

} // namespace nnflow::verify
