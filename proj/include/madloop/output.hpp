#pragma once

#include "madloop/ess.hpp"
#include "madloop/loop.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace madloop {

inline const std::string kTrajectoryHeader = "t,wd2,precision,recall,trace_cov";
inline const std::string kModalColumns = ",avg_modal_variance,mode_recall";
inline const std::string kSweepHeader = "n_r,n_s,lambda,n_e,ratio,admissible,limit_wd2,se,status";

/// 17 significant digits, so every double round-trips.
std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);

/// One row per generation per trial, trials in index order.
std::string trajectory_csv(const std::vector<LoopResult>& results, bool modal);

/// Per-generation mean and standard error over the trials that reached t.
/// Same header as trajectory.csv; cells with no data stay empty.
std::string trajectory_mean_csv(const std::vector<LoopResult>& results, bool modal);
std::string trajectory_se_csv(const std::vector<LoopResult>& results, bool modal);

std::string sweep_csv(const std::vector<SweepCell>& cells);
std::string frontier_csv(const std::vector<FrontierPoint>& frontier);
std::string baseline_csv(const BaselineCurve& curve);
std::string scaling_csv(const std::vector<ScalingRow>& rows);
std::string scaling_slopes_csv(const std::vector<ScalingSlope>& slopes);

/// Writes via a sibling temporary file and rename, creating parent directories.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Minimal CSV reader for the files above (no quoting).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] int column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

} // namespace madloop
