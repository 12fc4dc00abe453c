#pragma once

#include <ostream>

namespace qfl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;
/// selftest or qaoa-bench finished but a check fell short.
inline constexpr int kExitCheckFailed = 3;

/// Subcommands: optimize, federate, qaoa-bench, selftest.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qfl
