#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qedet::cli {

/// Runs one command line (without the program name). Returns the process
/// exit code: 0 success, 1 computation error or infeasible result, 2 usage.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qedet::cli
