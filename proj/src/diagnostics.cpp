#include "madloop/diagnostics.hpp"

#include "madloop/errors.hpp"
#include "madloop/stats.hpp"

#include <cmath>
#include <limits>

namespace madloop {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZLimit = 4.0;
constexpr int kMinTrials = 100;

void require_power(int trials) {
    if (trials < kMinTrials) {
        throw DomainError("check needs at least " + std::to_string(kMinTrials) + " trials (got " +
                          std::to_string(trials) + ")");
    }
}

// |mean - target| / se from sums of deviations d = x - target, so estimates
// that hit the target exactly give z = 0 exactly.
double z_score(double sum_dev, double sum_sq_dev, int n) {
    const double m = sum_dev / n;
    const double var = std::max(0.0, (sum_sq_dev - n * m * m) / (n - 1));
    const double se = std::sqrt(var / n);
    if (se == 0.0) {
        return m == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return std::abs(m) / se;
}

} // namespace

SeriesStats SeriesStats::from_values(Eigen::MatrixXd values) {
    SeriesStats s;
    const auto cols = values.cols();
    s.mean.assign(cols, kNaN);
    s.se.assign(cols, kNaN);
    std::vector<double> column;
    for (Eigen::Index c = 0; c < cols; ++c) {
        column.clear();
        for (Eigen::Index r = 0; r < values.rows(); ++r) {
            if (!std::isnan(values(r, c))) {
                column.push_back(values(r, c));
            }
        }
        if (!column.empty()) {
            const MeanSe ms = mean_se(column);
            s.mean[c] = ms.mean;
            s.se[c] = ms.se;
        }
    }
    s.values = std::move(values);
    return s;
}

TrajectoryStats TrajectoryStats::from_results(const std::vector<LoopResult>& results) {
    if (results.empty()) {
        throw InsufficientDataError("no trials to summarize");
    }
    const auto generations = static_cast<Eigen::Index>(results.front().records.size());
    for (const auto& r : results) {
        if (r.status == RunStatus::degenerate) {
            throw LoopDegenerateError("trial with seed " + std::to_string(r.key.seed()) + " degenerated: " + r.message);
        }
        if (static_cast<Eigen::Index>(r.records.size()) != generations) {
            throw InvariantViolation("trials span different numbers of generations");
        }
    }
    const auto trials = static_cast<Eigen::Index>(results.size());
    Eigen::MatrixXd wd2(trials, generations), tr(trials, generations), prec(trials, generations),
        rec(trials, generations), amv(trials, generations), mrec(trials, generations);
    TrajectoryStats out;
    for (Eigen::Index i = 0; i < trials; ++i) {
        out.seeds.push_back(results[i].key.seed());
        for (Eigen::Index t = 0; t < generations; ++t) {
            const MetricPanel& m = results[i].records[t].metrics;
            wd2(i, t) = m.wd2;
            tr(i, t) = m.trace_cov;
            prec(i, t) = m.precision.value_or(kNaN);
            rec(i, t) = m.recall.value_or(kNaN);
            amv(i, t) = m.avg_modal_variance.value_or(kNaN);
            mrec(i, t) = m.mode_recall.value_or(kNaN);
        }
    }
    out.trials = static_cast<int>(trials);
    out.generations = static_cast<int>(generations);
    out.wd2 = SeriesStats::from_values(std::move(wd2));
    out.trace_cov = SeriesStats::from_values(std::move(tr));
    out.precision = SeriesStats::from_values(std::move(prec));
    out.recall = SeriesStats::from_values(std::move(rec));
    out.avg_modal_variance = SeriesStats::from_values(std::move(amv));
    out.mode_recall = SeriesStats::from_values(std::move(mrec));
    return out;
}

TrajectoryStats TrajectoryStats::from_wd2(const Eigen::MatrixXd& wd2) {
    TrajectoryStats out;
    out.trials = static_cast<int>(wd2.rows());
    out.generations = static_cast<int>(wd2.cols());
    out.wd2 = SeriesStats::from_values(wd2);
    return out;
}

OneStepReport one_step_distribution_check(const GaussianParams& state, std::size_t n_s, double lambda, int trials,
                                          const StreamKey& key, const GaussianEstimator& estimator) {
    require_power(trials);
    check_lambda(lambda);
    const int d = state.dim();
    const Eigen::MatrixXd target_cov = lambda * state.cov();
    Eigen::VectorXd sum_mu = Eigen::VectorXd::Zero(d), sq_mu = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd sum_cov = Eigen::MatrixXd::Zero(d, d), sq_cov = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < trials; ++i) {
        Rng rng = key.child(static_cast<std::uint64_t>(i)).rng();
        const PointMatrix draws = draw_gaussian(state, lambda, n_s, rng);
        const GaussianParams fit = estimator ? estimator(draws) : fit_gaussian(draws);
        const Eigen::VectorXd dmu = fit.mean() - state.mean();
        const Eigen::MatrixXd dcov = fit.cov() - target_cov;
        sum_mu += dmu;
        sq_mu += dmu.cwiseAbs2();
        sum_cov += dcov;
        sq_cov += dcov.cwiseAbs2();
    }

    OneStepReport report;
    report.n_s = n_s;
    report.lambda = lambda;
    report.trials = trials;
    report.key = key;
    report.mean_estimate = state.mean() + sum_mu / trials;
    report.cov_estimate = target_cov + sum_cov / trials;
    for (int a = 0; a < d; ++a) {
        report.max_abs_z_mean = std::max(report.max_abs_z_mean, z_score(sum_mu(a), sq_mu(a), trials));
        for (int b = a; b < d; ++b) {
            report.max_abs_z_cov = std::max(report.max_abs_z_cov, z_score(sum_cov(a, b), sq_cov(a, b), trials));
        }
    }
    report.pass = report.max_abs_z() < kZLimit;
    return report;
}

TraceReport trace_process_check(const GaussianParams& state, std::size_t n_s, double lambda, int trials,
                                const StreamKey& key) {
    require_power(trials);
    check_lambda(lambda);
    if (lambda == 0.0) {
        throw DomainError("trace ratio is undefined for lambda = 0");
    }
    if (n_s < 2) {
        throw InsufficientDataError("trace check needs n_s >= 2");
    }
    const double prev_trace = state.trace();
    if (!(prev_trace > 0.0)) {
        throw DomainError("trace check needs a state with positive trace");
    }
    std::vector<double> y(static_cast<std::size_t>(trials));
    double trace_sum = 0.0;
    for (int i = 0; i < trials; ++i) {
        Rng rng = key.child(static_cast<std::uint64_t>(i)).rng();
        const double tr = fit_gaussian(draw_gaussian(state, lambda, n_s, rng)).trace();
        trace_sum += tr;
        y[static_cast<std::size_t>(i)] = tr / (lambda * prev_trace);
    }
    const Eigen::VectorXd w = state.eigenvalues() / state.eigenvalues().sum();

    TraceReport report;
    report.n_s = n_s;
    report.lambda = lambda;
    report.trials = trials;
    report.key = key;
    report.mean_trace = trace_sum / trials;
    const MeanSe ms = mean_se(y);
    report.mean_y = ms.mean;
    report.se_y = ms.se;
    report.z_mean = ms.se > 0.0 ? (ms.mean - 1.0) / ms.se : 0.0;
    report.var_y = ms.sd * ms.sd;
    report.analytic_var_y = 2.0 * w.squaredNorm() / static_cast<double>(n_s - 1);
    report.var_rel_error = report.var_y / report.analytic_var_y - 1.0;
    report.pass = std::abs(report.z_mean) < kZLimit && std::abs(report.var_rel_error) <= 0.10;
    return report;
}

std::string to_string(Madness verdict) {
    switch (verdict) {
    case Madness::mad:
        return "MAD";
    case Madness::not_mad:
        return "not-MAD";
    case Madness::inconclusive:
        return "inconclusive";
    }
    return "unknown";
}

MadnessReport madness_detector(const TrajectoryStats& stats, int burn_in) {
    MadnessReport report;
    const int T = stats.generations;
    const int span = T - burn_in;
    if (burn_in < 0) {
        throw DomainError("burn_in must be >= 0");
    }
    if (span < 10) {
        report.reason = "only " + std::to_string(std::max(span, 0)) + " generations after burn-in (need 10)";
        return report;
    }
    if (stats.trials < 1) {
        throw InsufficientDataError("madness_detector needs at least one trial");
    }
    const Eigen::MatrixXd& wd2 = stats.wd2.values;
    std::vector<double> ts(static_cast<std::size_t>(span));
    for (int i = 0; i < span; ++i) {
        ts[static_cast<std::size_t>(i)] = burn_in + 1 + i;
    }
    auto row_tail = [&](int trial, int first, int count) {
        std::vector<double> v(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            v[static_cast<std::size_t>(i)] = wd2(trial, first + i);
        }
        return v;
    };

    // Slope interval: across trials when there are several, otherwise from the
    // residuals of the single series.
    double se = 0.0;
    double dof = 0.0;
    if (stats.trials >= 2) {
        std::vector<double> slopes;
        for (int i = 0; i < stats.trials; ++i) {
            slopes.push_back(ols_slope(ts, row_tail(i, burn_in, span)));
        }
        const MeanSe ms = mean_se(slopes);
        report.slope = ms.mean;
        se = ms.se;
        dof = stats.trials - 1;
    } else {
        const auto y = row_tail(0, burn_in, span);
        report.slope = ols_slope(ts, y);
        se = ols_slope_se(ts, y);
        dof = span - 2;
    }
    const double q = t_critical(0.95, dof);
    report.ci_low = report.slope - q * se;
    report.ci_high = report.slope + q * se;

    // Stationarity: trailing window vs a window centred on the post-burn-in span.
    const int w = std::max(5, span / 5);
    const int trailing_first = T - w;
    const int mid_first = burn_in + (span - w) / 2;
    std::vector<double> diffs;
    double trailing_sum = 0.0, mid_sum = 0.0;
    for (int i = 0; i < stats.trials; ++i) {
        const MeanSe tr = mean_se(row_tail(i, trailing_first, w));
        const MeanSe mid = mean_se(row_tail(i, mid_first, w));
        trailing_sum += tr.mean;
        mid_sum += mid.mean;
        diffs.push_back(tr.mean - mid.mean);
        if (stats.trials == 1) {
            report.window_diff_se = std::sqrt(tr.se * tr.se + mid.se * mid.se);
        }
    }
    report.trailing_mean = trailing_sum / stats.trials;
    report.mid_mean = mid_sum / stats.trials;
    if (stats.trials >= 2) {
        report.window_diff_se = mean_se(diffs).se;
    }
    report.stationary =
        std::abs(report.trailing_mean - report.mid_mean) <= 2.0 * report.window_diff_se;

    if (report.ci_low > 0.0) {
        report.verdict = Madness::mad;
        report.reason = "wd2 slope interval lies above zero";
    } else if (report.ci_high >= 0.0) {
        report.verdict = Madness::not_mad;
        report.reason = "wd2 slope interval contains zero";
    } else if (report.stationary) {
        report.verdict = Madness::not_mad;
        report.reason = "wd2 decreasing and settled";
    } else {
        report.verdict = Madness::inconclusive;
        report.reason = "wd2 still decreasing at the horizon";
    }
    return report;
}

} // namespace madloop
