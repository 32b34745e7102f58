#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace personaopt::cli {

// Runs the personaopt command line with `args` (program name excluded) and
// returns the process exit status: 0 ok, 2 data, 3 config, 4 transport,
// 5 integrity.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace personaopt::cli
