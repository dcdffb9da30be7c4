#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hopon::cli {

enum ExitCode : int { ok = 0, scenario_error = 1, runtime_error = 2, usage_error = 3 };

struct CommandOutcome {
    int exit_code = ok;
    std::vector<std::string> artifacts;
};

/// Runs one command line. `args` excludes the program name.
CommandOutcome execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hopon::cli
