#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace placefuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Runs one subcommand. `args` excludes the program name. Diagnostics go
/// to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace placefuse::cli
