#pragma once

#include <stdexcept>
#include <string>

namespace iw::cli {

/// Invocation/config problem: maps to exit code 2. Runtime failures map to 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Entry point of the `iw` tool (simulate / forecast / evaluate / report).
/// Returns the process exit code: 0 success, 1 runtime failure, 2 usage or
/// config error.
int run(int argc, const char* const* argv);

} // namespace iw::cli
