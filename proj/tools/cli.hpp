#pragma once

#include <iosfwd>

namespace sbmlab::cli {

/// Runs one sbmlab command line. Results go to the run store; `out` gets the
/// headline numbers, `err` the diagnostics. Returns 0 on success, 1 on a
/// numerical failure, 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sbmlab::cli
