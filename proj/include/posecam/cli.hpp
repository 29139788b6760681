#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posecam::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand. `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(const std::vector<std::string>& args);

}  // namespace posecam::cli
