#pragma once

#include <ostream>

namespace simucheck::cli {

/// Entry point of the `simucheck` command. Returns the process exit status:
/// 0 clean, 2 bugs found (or corpus mismatch), 1 tool error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace simucheck::cli
