#pragma once

#include "madloop/errors.hpp"
#include "madloop/gaussian.hpp"
#include "madloop/loop.hpp"
#include "madloop/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace madloop {

/// Mean W2 of single-shot Gaussian fits on n reference draws, as a function of n.
struct BaselineCurve {
    std::vector<std::size_t> n;
    std::vector<double> mean_wd2;
    std::vector<double> se;
    std::vector<double> smoothed;  ///< decreasing fit of mean_wd2 used for inversion
    int trials = 0;
    std::uint64_t seed = 0;
    std::string reference_id;
};

/// Log-spaced integer grid from lo to hi (inclusive, duplicates removed).
std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, int points);

/// Grid point n, trial j draws from StreamKey{seed, [n, j]}, so extending the
/// grid leaves existing points unchanged. Throws DataQualityError if the
/// averaged curve rises by more than twice the combined SE between
/// neighbouring points, or if the smoothed curve is not strictly decreasing.
BaselineCurve build_baseline(const GaussianParams& reference, const std::vector<std::size_t>& n_grid, int trials,
                             std::uint64_t seed, int threads = 1);

struct LimitEstimate {
    double limit_wd2 = 0.0;
    double se = 0.0;
    int window = 0;
    int generations = 0;
    int trials = 0;
    double slope = 0.0;       ///< mean per-trial slope over the trailing window
    double slope_low = 0.0;   ///< 99% interval
    double slope_high = 0.0;
    bool converged = false;
    LoopConfig config;
};

class NotConvergedError : public Error {
public:
    NotConvergedError(const std::string& what, LimitEstimate estimate) : Error(what), estimate_(std::move(estimate)) {}
    [[nodiscard]] const LimitEstimate& estimate() const { return estimate_; }

private:
    LimitEstimate estimate_;
};

/// Trailing-window estimate of the fresh-data loop's limiting W2.
/// Window W = max(5, T/5); the limit is the mean of wd2 over the window and
/// all trials, its SE is taken across per-trial window means. Throws
/// NotConvergedError when the 99% interval of the trailing slope excludes 0,
/// and LoopDegenerateError if any trial degenerates.
LimitEstimate limiting_distance(const LoopConfig& config, const GaussianParams& reference, int trials,
                                int threads = 1);

enum class GridRange { inside, above_grid, below_grid };

struct EssResult {
    double n_e = 0.0;
    double ratio = 0.0;
    double limit_wd2 = 0.0;
    double limit_se = 0.0;
    bool admissible = false;
    GridRange range = GridRange::inside;
};

/// Inverts the smoothed baseline by piecewise-linear interpolation in
/// (log n, log wd2). Limits outside the curve are clamped to the grid ends
/// and flagged.
EssResult effective_sample_size(double limit_wd2, double limit_se, const BaselineCurve& curve, std::size_t n_r);

/// Generations used for a sweep cell: max(min_generations, ceil(time_constants * (n_r + n_s) / n_r)).
struct GenerationRule {
    int min_generations = 50;
    double time_constants = 5.0;
    int max_doublings = 2;  ///< retries with doubled T when a cell has not converged

    [[nodiscard]] int generations(std::size_t n_r, std::size_t n_s) const;
    bool operator==(const GenerationRule&) const = default;
};

struct SweepAxes {
    std::vector<std::size_t> n_r;
    std::vector<std::size_t> n_s;
    std::vector<double> lambda;
    std::vector<int> memory_k{1};
    bool operator==(const SweepAxes&) const = default;
};

struct SweepOptions {
    int trials = 20;
    GenerationRule rule;
    std::vector<std::size_t> baseline_grid;  ///< empty: log grid from 20 to 20000
    int baseline_trials = 20;
};

struct SweepCell {
    std::size_t n_r = 0;
    std::size_t n_s = 0;
    double lambda = 1.0;
    int memory_k = 1;
    LoopConfig config;                      ///< exactly what was run (seed included)
    std::optional<LimitEstimate> limit;
    std::optional<EssResult> ess;           ///< absent for failed cells
    std::string status = "ok";
};

struct FrontierPoint {
    std::size_t n_r = 0;
    double lambda = 1.0;
    int memory_k = 1;
    /// Largest n_s such that it and every smaller n_s on the grid is
    /// admissible; empty when the smallest n_s already is not.
    std::optional<std::size_t> max_admissible_n_s;
};

struct SweepResult {
    BaselineCurve baseline;
    std::vector<SweepCell> cells;  ///< ordered n_r, memory_k, lambda, n_s (outer to inner)
    std::vector<FrontierPoint> frontier;
};

/// Seed of a sweep cell. The bias strength is deliberately not part of the
/// path, so cells differing only in lambda share random streams and compare
/// as paired samples.
std::uint64_t sweep_cell_seed(std::uint64_t master, std::size_t n_r, std::size_t n_s, int memory_k);

/// Fresh-data loop config of one sweep cell (n_ini = n_r + n_s).
LoopConfig sweep_cell_config(std::uint64_t master, std::size_t n_r, std::size_t n_s, double lambda, int memory_k,
                             const GenerationRule& rule);

/// Runs one cell including retries; never throws for convergence or degeneracy.
SweepCell run_sweep_cell(const LoopConfig& config, const GaussianParams& reference, const BaselineCurve& baseline,
                         const SweepOptions& options);

SweepResult sweep_phase_diagram(const SweepAxes& axes, const GaussianParams& reference, const SweepOptions& options,
                                std::uint64_t seed, int threads = 1);

std::vector<FrontierPoint> admissibility_frontier(const std::vector<SweepCell>& cells);

struct ScalingRow {
    double p = 1.0;
    double lambda = 1.0;
    std::size_t total_n = 0;
    LoopConfig config;
    std::optional<LimitEstimate> limit;
    std::string status = "ok";
};

struct ScalingSlope {
    double p = 1.0;
    double lambda = 1.0;
    double slope = 0.0;           ///< log-log OLS over every converged point
    double slope_se = 0.0;
    double trailing_slope = 0.0;  ///< same over the last three converged points
    int points = 0;
};

struct ScalingResult {
    std::vector<ScalingRow> rows;  ///< ordered p, lambda, total_n
    std::vector<ScalingSlope> slopes;
};

/// Limiting W2 versus total per-generation size n for each (p, lambda), with
/// n_ini = n. Streams are keyed by total_n only, so all (p, lambda) curves are
/// paired at each n.
ScalingResult scaling_study(const std::vector<double>& p_grid, const std::vector<std::size_t>& total_n_grid,
                            const std::vector<double>& lambda_grid, const GaussianParams& reference, int trials,
                            const GenerationRule& rule, std::uint64_t seed, int threads = 1);

std::string to_string(GridRange range);

} // namespace madloop
