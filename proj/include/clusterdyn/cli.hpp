#pragma once

#include <iosfwd>

namespace clusterdyn {

// Command-line entry point. Exit codes: 0 ok, 2 config, 3 positivity,
// 4 enumeration budget, 1 anything else.
int run_cli(int argc, char** argv);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace clusterdyn
