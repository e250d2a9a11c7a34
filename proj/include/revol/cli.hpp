#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "revol/market_data.hpp"

namespace revol::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInternalError = 2;

/// Runs one `revol` subcommand. `args` excludes the program name. Results go
/// to `out`, usage and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// `--data` resolution: a CSV file, a comma-separated list of files, or a
/// directory of `*.csv`. The symbol is the file stem.
std::vector<SymbolSeries> load_data(const std::string& spec);

/// REVOL_LOG_LEVEL (trace, debug, info, warn, error, off); default warn.
void configure_logging();

}  // namespace revol::cli
