#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bandrank::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming the default output directory (fallback "out").
inline constexpr const char* kOutputDirEnv = "BANDRANK_OUT_DIR";

/// Entry point behind the `bandrank` executable. `args` excludes the program
/// name. Subcommands: ingest, tile, sample, rank, train, infer, monitor, report.
/// Returns 0 on success, 1 on data errors, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bandrank::cli
