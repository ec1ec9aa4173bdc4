#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace perin {

// Runs one subcommand. Returns 0 on success, 1 on usage or configuration
// errors, 2 on data errors and 3 on infeasibility; failures also write one
// JSON line {"error": kind, "message": ...} to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace perin
