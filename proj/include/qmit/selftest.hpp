#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qmit {

struct CheckResult {
  std::string name;
  bool passed;
  std::string detail;
};

struct SelftestOptions {
  /// Negative test: the inverse channel pairs each rate with the wrong generator.
  bool corrupt_inverse_order = false;
};

std::vector<CheckResult> run_selftest(const SelftestOptions& options = {});

/// Pass/fail table; returns true iff every check passed.
bool print_results(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace qmit
