#pragma once

#include <string>
#include <vector>

namespace sgt::run {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // empty on success
};

// Fast verification battery: finite-difference gradient checks, naive-loop
// formula oracles, permutation invariance, relevancy identities, and the
// harness invariants. Completes in well under a minute.
std::vector<CheckResult> run_selftest();

}  // namespace sgt::run
