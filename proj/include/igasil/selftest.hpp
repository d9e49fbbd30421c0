#pragma once

// Fast invariant suite behind `igasil selftest`.

#include "igasil/envs.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace igasil {

struct SelftestCheck {
  std::string group;
  std::string name;
  bool passed;
  std::string detail;
};

struct SelftestHooks {
  /// Replaces the payoff table under test (negative testing).
  std::optional<PayoffMatrix> payoff;
};

std::vector<SelftestCheck> run_selftest(const SelftestHooks& hooks = {});
void print_selftest_report(std::ostream& out, const std::vector<SelftestCheck>& checks);
bool all_passed(const std::vector<SelftestCheck>& checks);

}  // namespace igasil
