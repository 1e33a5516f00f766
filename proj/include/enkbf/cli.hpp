#pragma once

#include <iosfwd>

namespace enkbf {

enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_config = 3, exit_numeric = 4, exit_io = 5 };

/// Parses argv and runs one subcommand. Failures are reported on `err` as a
/// single line "enkbf: error[<category>]: <message>".
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace enkbf
