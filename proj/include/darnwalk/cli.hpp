#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace darnwalk::cli {

/// Process exit codes.
enum ExitCode : int {
    ok = 0,
    parse_error = 2,
    invariant_error = 3,
    domain_error = 4,
    precondition_error = 5,
    non_convergence = 6,
    unsupported_geometry = 7,
    io_error = 8,
    other_error = 9,
};

/// Runs the command line `args` (without the program name). Reports go to
/// `out`; errors go to `err` as one JSON object per line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace darnwalk::cli
