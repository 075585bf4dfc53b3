#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctfa::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataOrConfig = 2,
    kNumerical = 3,
};

// Runs one subcommand (synth, train, enhance, eval, gradcheck). args excludes
// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctfa::cli
