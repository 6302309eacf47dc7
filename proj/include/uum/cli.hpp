#pragma once

#include <iosfwd>

namespace uum {

/// Runs the `uum` command line. Returns the process exit code:
/// 0 ok, 2 config error, 3 data error, 4 numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace uum
