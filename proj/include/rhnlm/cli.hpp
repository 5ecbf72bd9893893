// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rhnlm::cli {

enum ExitCode : int { kOk = 0, kContractViolation = 1, kNumericalFailure = 2 };

// Runs one subcommand. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace rhnlm::cli
