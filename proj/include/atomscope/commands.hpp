#pragma once

#include <filesystem>

#include "atomscope/config.hpp"

// Batch commands behind the CLI. Each writes its artifacts plus
// resolved_config.json into the output directory and is deterministic
// given (config, seed): repeated runs produce byte-identical files.

namespace atomscope {

struct CommandContext {
  RunConfig config;
  std::filesystem::path out_dir;
  int workers = 0;
};

// Franck-Condon matrix as a dense CSV plus a JSON column-deficit report.
void cmd_fc_matrix(const CommandContext& ctx);

// survival_vs_position.csv over the configured scan; survival normalized
// to the zero-duration value.
void cmd_survival_curve(const CommandContext& ctx);

// Monte Carlo scan map CSV plus a JSON summary (tilt estimate when the
// array has >= 2 rows; insufficient signal becomes a warning field).
void cmd_scan_map(const CommandContext& ctx);

// Fit (decay | temperature | tilt) on an input CSV; JSON result plus
// residuals CSV.
void cmd_fit(const CommandContext& ctx, const std::filesystem::path& input);

}  // namespace atomscope
