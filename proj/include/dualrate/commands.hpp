#pragma once

// Batch commands behind the command-line front end. Each returns its report
// and exit code; writing files is left to the caller.

#include "dualrate/config.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dualrate {

namespace exit_codes {
constexpr int ok = 0;
constexpr int config_error = 1;
constexpr int empty_range = 2;
constexpr int crosscheck_breach = 3;
constexpr int runtime_error = 4;
}  // namespace exit_codes

struct CommandOptions {
    bool strict = false;
    bool require_nonempty_range = false;
    std::size_t dump_paths = 0;  ///< hedge: per-path CSV for the first N hedger paths
};

struct CommandResult {
    int exit_code = exit_codes::ok;
    nlohmann::json report;
    std::string csv;       ///< sweep table or path dump; empty if none
    std::string csv_name;  ///< suggested file name for `csv`
};

enum class SweepAxis { x1, x2, spot, rate_spread };

std::optional<SweepAxis> parse_sweep_axis(const std::string& name);
const char* to_string(SweepAxis axis);

/// Both parties' prices, the fair range and spot hedge ratios from every
/// enabled solver.
CommandResult cmd_price(const RunConfig& config, const CommandOptions& options = {});

/// PDE against tree at the spot for both parties; breach when the gap
/// exceeds max(0.5% of the PDE price, 0.02).
CommandResult cmd_crosscheck(const RunConfig& config, const CommandOptions& options = {});

/// Replication statistics for both parties and the netted-wealth diagnostic.
CommandResult cmd_hedge(const RunConfig& config, const CommandOptions& options = {});

/// One CSV row per sweep point with both prices and the range width.
CommandResult cmd_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values,
                        const CommandOptions& options = {});

/// Every floating-point number rounded to 12 significant digits.
nlohmann::json rounded(const nlohmann::json& doc);

/// "%.12g" formatting used in CSV output.
std::string format12(double v);

}  // namespace dualrate
