#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bgl {

/// Entry point for the `basisglasso` command. `args` excludes the program
/// name. Returns the process exit code: 0 on success, otherwise the
/// ErrorCategory value of the failure (1 for unexpected errors).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace bgl
