#pragma once

#include <map>
#include <string>

namespace mhrsim {

// Exit codes: 0 success, 2 config/parse error, 3 unwritable output.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitOutputError = 3;

// Expands the grid, calibrates alpha* per target MHR (cached), runs every
// scenario and writes estimates.csv + metrics.csv under the output directory.
int cmd_run(const std::string& config_path, long replicates_override = 0,
            int threads_override = -1);

// Generates one cohort and writes curves.csv with rolling HR estimates.
int cmd_curve(const std::string& config_path);

// Renders a metrics.csv as paper-style text tables on stdout, two decimals.
int cmd_tables(const std::string& metrics_csv,
               const std::map<std::string, std::string>& filter = {});

}  // namespace mhrsim
