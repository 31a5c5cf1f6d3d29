#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace broadrefine {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// args excludes the program name. Status lines go to `out`, errors and
// usage text to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace broadrefine
