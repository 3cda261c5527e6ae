#pragma once

#include "madloop/gaussian.hpp"
#include "madloop/loop.hpp"
#include "madloop/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace madloop {

/// One metric across trials: values(trial, t - 1), plus per-generation mean and
/// standard error. Entries a trial did not evaluate are NaN; mean and se use
/// only the trials that did (NaN when none did).
struct SeriesStats {
    Eigen::MatrixXd values;
    std::vector<double> mean;
    std::vector<double> se;

    static SeriesStats from_values(Eigen::MatrixXd values);
};

struct TrajectoryStats {
    int trials = 0;
    int generations = 0;
    SeriesStats wd2;
    SeriesStats trace_cov;
    SeriesStats precision;
    SeriesStats recall;
    SeriesStats avg_modal_variance;
    SeriesStats mode_recall;
    std::vector<std::uint64_t> seeds;  ///< stream seed of each trial

    /// Aggregates completed runs. Every result must span the same number of
    /// generations; degenerate runs are rejected with LoopDegenerateError.
    static TrajectoryStats from_results(const std::vector<LoopResult>& results);

    /// Stats over a bare wd2 matrix (rows = trials); other series are empty.
    static TrajectoryStats from_wd2(const Eigen::MatrixXd& wd2);
};

using GaussianEstimator = std::function<GaussianParams(const PointMatrix&)>;

struct OneStepReport {
    std::size_t n_s = 0;
    double lambda = 1.0;
    int trials = 0;
    StreamKey key;
    Eigen::VectorXd mean_estimate;   ///< trial average of mu_t
    Eigen::MatrixXd cov_estimate;    ///< trial average of Sigma_t
    double max_abs_z_mean = 0.0;
    double max_abs_z_cov = 0.0;
    bool pass = false;

    [[nodiscard]] double max_abs_z() const { return std::max(max_abs_z_mean, max_abs_z_cov); }
};

/// Monte-Carlo check of E[mu_t | G^{t-1}] = mu_{t-1} and
/// E[Sigma_t | G^{t-1}] = lambda Sigma_{t-1} for one sampling-and-refit step.
/// Trial i uses stream key.child(i). Passes iff every entrywise |z| < 4.
OneStepReport one_step_distribution_check(const GaussianParams& state, std::size_t n_s, double lambda, int trials,
                                          const StreamKey& key,
                                          const GaussianEstimator& estimator = GaussianEstimator{});

struct TraceReport {
    std::size_t n_s = 0;
    double lambda = 1.0;
    int trials = 0;
    StreamKey key;
    double mean_trace = 0.0;      ///< trial average of tr(Sigma_t)
    double mean_y = 0.0;          ///< Y = tr(Sigma_t) / (lambda tr(Sigma_{t-1}))
    double se_y = 0.0;
    double z_mean = 0.0;
    double var_y = 0.0;
    double analytic_var_y = 0.0;  ///< 2 sum w_j^2 / (n_s - 1)
    double var_rel_error = 0.0;
    bool pass = false;
};

/// Checks the generalized chi-square law of the trace ratio Y.
/// Passes iff |z_mean| < 4 and the variance is within 10% of the analytic value.
TraceReport trace_process_check(const GaussianParams& state, std::size_t n_s, double lambda, int trials,
                                const StreamKey& key);

enum class Madness { mad, not_mad, inconclusive };

struct MadnessReport {
    Madness verdict = Madness::inconclusive;
    double slope = 0.0;       ///< mean per-trial OLS slope of wd2 over t > burn_in
    double ci_low = 0.0;      ///< 95% interval
    double ci_high = 0.0;
    bool stationary = false;
    double trailing_mean = 0.0;
    double mid_mean = 0.0;
    double window_diff_se = 0.0;
    std::string reason;
};

/// Trend test on wd2. MAD iff the slope CI lies above 0; not-MAD iff it
/// contains 0, or lies below 0 and the trailing window has settled at the
/// level of the mid window (within 2 SE). Fewer than 10 generations past
/// burn-in is inconclusive.
MadnessReport madness_detector(const TrajectoryStats& stats, int burn_in = 5);

std::string to_string(Madness verdict);

} // namespace madloop
