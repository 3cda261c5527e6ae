#pragma once

#include "madloop/config.hpp"
#include "madloop/diagnostics.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace madloop {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitDegenerate = 2,
    kExitNotConverged = 3,
    kExitCheckFailed = 4,
};

/// Runs the configured command, writes its outputs and manifest.json into
/// out_dir, and returns the process exit code. Results never depend on
/// `threads`. ConfigError propagates to the caller.
int run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir, int threads,
                   std::ostream& log);

/// Nontrivial Gaussian state used by the check batteries (mean and
/// covariance drawn from the given seed).
GaussianParams check_state(int d, std::uint64_t seed);

/// Plain-text summary of a finished run directory.
std::string render_report(const std::filesystem::path& run_dir);

} // namespace madloop
