#pragma once

#include <string>

#include "degp/config.hpp"

namespace degp::cli {

/// Dispatch on config["experiment"]; returns a process exit code.
/// Every run writes manifest.json and config.resolved into the output
/// directory next to its result files, and re-running from config.resolved
/// reproduces the result files byte for byte.
int run(const Config& cfg);

int run_regress1d(const Config& cfg);
int run_uci(const Config& cfg);
int run_classify_synth(const Config& cfg);
int run_bandit(const Config& cfg);
int run_kernel_check(const Config& cfg);

/// Output directory: config "out" (default "results/<experiment>"), rooted
/// at $DEGP_OUT_ROOT when that is set and the path is relative.
std::string prepare_outdir(const Config& cfg);

}  // namespace degp::cli
