#pragma once

#include <string>
#include <vector>

namespace qfl {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runtime invariant checks over every module; a few seconds on one core.
std::vector<SelftestCheck> run_selftest();

}  // namespace qfl
