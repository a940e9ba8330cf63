#pragma once

#include <ostream>

namespace cdvi::cli {

/// Parses the command line, runs one command and returns the exit code:
/// 0 success, 1 runtime error ("module: message" on `err`), 2 usage or
/// schema violation (the offending field path on `err`).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdvi::cli
