#pragma once

#include <iosfwd>

namespace s2s {

// Entry point behind main(), separated so tests can run the CLI
// in-process. Returns the process exit code: 0 success, 1 runtime
// failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace s2s
