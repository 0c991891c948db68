#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace upfcache::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitInvariant = 2;

/// Run one command line (without the program name). Diagnostics go to
/// `err`; summaries and the analytic JSON go to `out`.
int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace upfcache::cli
