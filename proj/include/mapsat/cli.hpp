#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mapsat {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_partial = 2,
    exit_integrity = 3,
};

/// Entry point of the `mapsat` tool. args excludes the program name.
int run_cli(std::vector<std::string> const &args, std::ostream &out,
            std::ostream &err);

} // namespace mapsat
