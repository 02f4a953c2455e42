#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace paradock::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kMissingFile = 2,
    kMismatch = 3,
    kNoContacts = 4,
    kDegenerate = 5,
};

inline constexpr int kSchemaVersion = 1;

// Runs one command line (args exclude the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace paradock::cli
