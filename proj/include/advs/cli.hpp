#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace advs {

/// Runs one `advs` invocation; args exclude the program name. Returns the
/// process exit status. Failures print a single `advs: error: ...` line to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace advs
