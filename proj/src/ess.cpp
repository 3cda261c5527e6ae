#include "madloop/ess.hpp"

#include "madloop/diagnostics.hpp"
#include "madloop/metrics.hpp"
#include "madloop/parallel.hpp"
#include "madloop/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace madloop {

std::string to_string(GridRange range) {
    switch (range) {
    case GridRange::inside:
        return "inside";
    case GridRange::above_grid:
        return "above_grid";
    case GridRange::below_grid:
        return "below_grid";
    }
    return "unknown";
}

std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, int points) {
    if (lo < 1 || hi < lo || points < 1) {
        throw DomainError("log_grid needs 1 <= lo <= hi and points >= 1");
    }
    std::vector<std::size_t> grid;
    if (points == 1) {
        return {lo};
    }
    const double a = std::log(static_cast<double>(lo));
    const double b = std::log(static_cast<double>(hi));
    for (int i = 0; i < points; ++i) {
        const double x = a + (b - a) * i / (points - 1);
        const auto n = static_cast<std::size_t>(std::llround(std::exp(x)));
        if (grid.empty() || n > grid.back()) {
            grid.push_back(n);
        }
    }
    grid.back() = hi;
    return grid;
}

namespace {

// Weighted pool-adjacent-violators fit of a non-increasing sequence.
std::vector<double> decreasing_fit(const std::vector<double>& y, const std::vector<double>& se) {
    struct Block {
        double value;
        double weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double w = 1.0 / std::max(se[i] * se[i], 1e-300);
        blocks.push_back({y[i], w, 1});
        while (blocks.size() >= 2 && blocks[blocks.size() - 2].value < blocks.back().value) {
            Block b = blocks.back();
            blocks.pop_back();
            Block& a = blocks.back();
            a.value = (a.value * a.weight + b.value * b.weight) / (a.weight + b.weight);
            a.weight += b.weight;
            a.count += b.count;
        }
    }
    std::vector<double> out;
    for (const Block& b : blocks) {
        out.insert(out.end(), b.count, b.value);
    }
    return out;
}

std::string describe(const GaussianParams& g) {
    std::ostringstream os;
    os << "gaussian(d=" << g.dim() << ", trace=" << g.trace() << ")";
    return os.str();
}

} // namespace

BaselineCurve build_baseline(const GaussianParams& reference, const std::vector<std::size_t>& n_grid, int trials,
                             std::uint64_t seed, int threads) {
    if (n_grid.size() < 2) {
        throw DomainError("baseline grid needs at least two points");
    }
    if (trials < 2) {
        throw DomainError("baseline needs at least two trials");
    }
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] < 2 || (i > 0 && n_grid[i] <= n_grid[i - 1])) {
            throw DomainError("baseline grid must be strictly increasing with n >= 2");
        }
    }
    const StreamKey root{seed, {}};
    const auto per_point = static_cast<std::size_t>(trials);
    const auto wds = parallel_map(n_grid.size() * per_point, threads, [&](std::size_t job) {
        const std::size_t n = n_grid[job / per_point];
        Rng rng = root.child({n, job % per_point}).rng();
        return wasserstein2_gaussian(fit_gaussian(draw_gaussian(reference, 1.0, n, rng)), reference);
    });

    BaselineCurve curve;
    curve.n = n_grid;
    curve.trials = trials;
    curve.seed = seed;
    curve.reference_id = describe(reference);
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        const MeanSe ms = mean_se(std::span<const double>(wds).subspan(i * per_point, per_point));
        curve.mean_wd2.push_back(ms.mean);
        curve.se.push_back(ms.se);
    }
    for (std::size_t i = 1; i < n_grid.size(); ++i) {
        const double rise = curve.mean_wd2[i] - curve.mean_wd2[i - 1];
        const double tol = 2.0 * std::hypot(curve.se[i], curve.se[i - 1]);
        if (rise > tol) {
            throw DataQualityError("baseline rises between n=" + std::to_string(n_grid[i - 1]) + " and n=" +
                                   std::to_string(n_grid[i]) + " beyond noise; increase trials");
        }
    }
    curve.smoothed = decreasing_fit(curve.mean_wd2, curve.se);
    for (std::size_t i = 1; i < curve.smoothed.size(); ++i) {
        if (!(curve.smoothed[i] < curve.smoothed[i - 1])) {
            throw DataQualityError("baseline is flat near n=" + std::to_string(n_grid[i]) +
                                   " after smoothing; increase trials or spread the grid");
        }
    }
    return curve;
}

LimitEstimate limiting_distance(const LoopConfig& config, const GaussianParams& reference, int trials, int threads) {
    if (config.loop_kind != LoopKind::fresh_data) {
        throw ConfigError("limiting_distance applies to the fresh_data loop");
    }
    if (trials < 2) {
        throw DomainError("limiting_distance needs at least two trials");
    }
    const int T = config.generations;
    const int w = std::max(5, T / 5);
    if (T < w + 1) {
        throw ConfigError("limiting_distance needs more generations than the window (" + std::to_string(w) + ")");
    }
    MetricOptions metrics;
    metrics.pr_stride = 0;
    metrics.modal_stride = 0;
    metrics.keep_models = false;
    const TrajectoryStats stats =
        TrajectoryStats::from_results(run_trials(config, Model{reference}, metrics, trials, threads));

    std::vector<double> ts(static_cast<std::size_t>(w));
    for (int i = 0; i < w; ++i) {
        ts[static_cast<std::size_t>(i)] = T - w + 1 + i;
    }
    std::vector<double> window_means, slopes;
    std::vector<double> row(static_cast<std::size_t>(w));
    for (int i = 0; i < trials; ++i) {
        for (int j = 0; j < w; ++j) {
            row[static_cast<std::size_t>(j)] = stats.wd2.values(i, T - w + j);
        }
        window_means.push_back(mean_se(row).mean);
        slopes.push_back(ols_slope(ts, row));
    }
    LimitEstimate est;
    const MeanSe limit = mean_se(window_means);
    const MeanSe slope = mean_se(slopes);
    const double q = t_critical(0.99, trials - 1);
    est.limit_wd2 = limit.mean;
    est.se = limit.se;
    est.window = w;
    est.generations = T;
    est.trials = trials;
    est.slope = slope.mean;
    est.slope_low = slope.mean - q * slope.se;
    est.slope_high = slope.mean + q * slope.se;
    est.converged = est.slope_low <= 0.0 && 0.0 <= est.slope_high;
    est.config = config;
    if (!est.converged) {
        std::ostringstream os;
        os << "wd2 still trending over the last " << w << " of " << T << " generations (slope " << est.slope
           << ", 99% interval [" << est.slope_low << ", " << est.slope_high << "]); increase generations";
        throw NotConvergedError(os.str(), est);
    }
    return est;
}

EssResult effective_sample_size(double limit_wd2, double limit_se, const BaselineCurve& curve, std::size_t n_r) {
    if (curve.n.size() < 2 || curve.smoothed.size() != curve.n.size()) {
        throw InvalidDataError("baseline curve is incomplete");
    }
    if (n_r < 1) {
        throw DomainError("effective_sample_size needs n_r >= 1");
    }
    if (!(limit_wd2 > 0.0) || !std::isfinite(limit_wd2)) {
        throw DomainError("limit_wd2 must be positive and finite");
    }
    EssResult r;
    r.limit_wd2 = limit_wd2;
    r.limit_se = limit_se;
    const auto& y = curve.smoothed;
    const std::size_t last = y.size() - 1;
    if (limit_wd2 >= y.front()) {
        r.n_e = static_cast<double>(curve.n.front());
        r.range = limit_wd2 > y.front() ? GridRange::above_grid : GridRange::inside;
    } else if (limit_wd2 <= y.back()) {
        r.n_e = static_cast<double>(curve.n.back());
        r.range = limit_wd2 < y.back() ? GridRange::below_grid : GridRange::inside;
    } else {
        // First knot at or below the target; y is strictly decreasing.
        std::size_t hi = 1;
        while (hi < last && y[hi] > limit_wd2) {
            ++hi;
        }
        const std::size_t lo = hi - 1;
        const double x0 = std::log(static_cast<double>(curve.n[lo]));
        const double x1 = std::log(static_cast<double>(curve.n[hi]));
        const double y0 = std::log(y[lo]);
        const double y1 = std::log(y[hi]);
        const double frac = (std::log(limit_wd2) - y0) / (y1 - y0);
        r.n_e = std::exp(x0 + frac * (x1 - x0));
    }
    r.ratio = r.n_e / static_cast<double>(n_r);
    r.admissible = r.ratio >= 1.0;
    return r;
}

int GenerationRule::generations(std::size_t n_r, std::size_t n_s) const {
    if (n_r == 0) {
        throw DomainError("generation rule needs n_r >= 1");
    }
    const double tau = static_cast<double>(n_r + n_s) / static_cast<double>(n_r);
    return std::max(min_generations, static_cast<int>(std::ceil(time_constants * tau)));
}

std::uint64_t sweep_cell_seed(std::uint64_t master, std::size_t n_r, std::size_t n_s, int memory_k) {
    const std::uint64_t path[] = {n_r, n_s, static_cast<std::uint64_t>(memory_k)};
    return stream_seed(master, path);
}

LoopConfig sweep_cell_config(std::uint64_t master, std::size_t n_r, std::size_t n_s, double lambda, int memory_k,
                             const GenerationRule& rule) {
    LoopConfig c;
    c.loop_kind = LoopKind::fresh_data;
    c.family = ModelFamily::gaussian();
    c.n_ini = n_r + n_s;
    c.n_r = n_r;
    c.n_s = n_s;
    c.lambda = lambda;
    c.memory_k = memory_k;
    c.generations = rule.generations(n_r, n_s);
    c.seed = sweep_cell_seed(master, n_r, n_s, memory_k);
    return c;
}

namespace {

// Runs limiting_distance, doubling T on non-convergence up to the rule's limit.
std::optional<LimitEstimate> limit_with_retries(LoopConfig config, const GaussianParams& reference, int trials,
                                                int max_doublings, std::string& status, int threads) {
    for (int attempt = 0;; ++attempt) {
        try {
            auto est = limiting_distance(config, reference, trials, threads);
            status = "ok";
            return est;
        } catch (const NotConvergedError& e) {
            if (attempt >= max_doublings) {
                status = std::string("not_converged: ") + e.what();
                return e.estimate();
            }
            config.generations *= 2;
        } catch (const LoopDegenerateError& e) {
            status = std::string("degenerate: ") + e.what();
            return std::nullopt;
        }
    }
}

} // namespace

SweepCell run_sweep_cell(const LoopConfig& config, const GaussianParams& reference, const BaselineCurve& baseline,
                         const SweepOptions& options) {
    SweepCell cell;
    cell.n_r = config.n_r;
    cell.n_s = config.n_s;
    cell.lambda = config.lambda;
    cell.memory_k = config.memory_k;
    cell.config = config;
    cell.limit = limit_with_retries(config, reference, options.trials, options.rule.max_doublings, cell.status, 1);
    if (cell.limit) {
        cell.config = cell.limit->config;
    }
    if (cell.status == "ok") {
        cell.ess = effective_sample_size(cell.limit->limit_wd2, cell.limit->se, baseline, cell.n_r);
    }
    return cell;
}

std::vector<FrontierPoint> admissibility_frontier(const std::vector<SweepCell>& cells) {
    std::map<std::tuple<std::size_t, int, double>, std::vector<const SweepCell*>> columns;
    for (const auto& c : cells) {
        columns[{c.n_r, c.memory_k, c.lambda}].push_back(&c);
    }
    std::vector<FrontierPoint> out;
    for (auto& [key, column] : columns) {
        std::sort(column.begin(), column.end(), [](const SweepCell* a, const SweepCell* b) { return a->n_s < b->n_s; });
        FrontierPoint p;
        p.n_r = std::get<0>(key);
        p.memory_k = std::get<1>(key);
        p.lambda = std::get<2>(key);
        for (const SweepCell* c : column) {
            if (!c->ess || !c->ess->admissible) {
                break;
            }
            p.max_admissible_n_s = c->n_s;
        }
        out.push_back(p);
    }
    return out;
}

SweepResult sweep_phase_diagram(const SweepAxes& axes, const GaussianParams& reference, const SweepOptions& options,
                                std::uint64_t seed, int threads) {
    if (axes.n_r.empty() || axes.n_s.empty() || axes.lambda.empty() || axes.memory_k.empty()) {
        throw ConfigError("every sweep axis needs at least one value");
    }
    SweepResult result;
    const auto grid = options.baseline_grid.empty() ? log_grid(20, 20000, 31) : options.baseline_grid;
    const std::uint64_t baseline_path[] = {0xba5e};
    result.baseline = build_baseline(reference, grid, options.baseline_trials, stream_seed(seed, baseline_path), threads);

    std::vector<LoopConfig> configs;
    for (std::size_t n_r : axes.n_r) {
        for (int k : axes.memory_k) {
            for (double lambda : axes.lambda) {
                for (std::size_t n_s : axes.n_s) {
                    LoopConfig c = sweep_cell_config(seed, n_r, n_s, lambda, k, options.rule);
                    c.validate();
                    configs.push_back(c);
                }
            }
        }
    }
    result.cells = parallel_map(configs.size(), threads, [&](std::size_t i) {
        return run_sweep_cell(configs[i], reference, result.baseline, options);
    });
    result.frontier = admissibility_frontier(result.cells);
    return result;
}

ScalingResult scaling_study(const std::vector<double>& p_grid, const std::vector<std::size_t>& total_n_grid,
                            const std::vector<double>& lambda_grid, const GaussianParams& reference, int trials,
                            const GenerationRule& rule, std::uint64_t seed, int threads) {
    if (p_grid.empty() || total_n_grid.empty() || lambda_grid.empty()) {
        throw ConfigError("every scaling axis needs at least one value");
    }
    std::vector<LoopConfig> configs;
    std::vector<ScalingRow> rows;
    for (double p : p_grid) {
        for (double lambda : lambda_grid) {
            for (std::size_t n : total_n_grid) {
                LoopConfig c;
                c.loop_kind = LoopKind::fresh_data;
                c.n_ini = n;
                c.lambda = lambda;
                c.p_fraction = p;
                c.total_n = n;
                const std::uint64_t path[] = {0x5ca1e, n};
                c.seed = stream_seed(seed, path);
                c.generations = rule.generations(c.real_per_generation(), c.synthetic_per_generation());
                c.validate();
                configs.push_back(c);
                rows.push_back({p, lambda, n, c, std::nullopt, "ok"});
            }
        }
    }
    auto limits = parallel_map(configs.size(), threads, [&](std::size_t i) {
        std::string status;
        auto est = limit_with_retries(configs[i], reference, trials, rule.max_doublings, status, 1);
        return std::make_pair(est, status);
    });

    ScalingResult result;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].limit = limits[i].first;
        rows[i].status = limits[i].second;
        if (rows[i].limit) {
            rows[i].config = rows[i].limit->config;
        }
    }
    for (double p : p_grid) {
        for (double lambda : lambda_grid) {
            std::vector<double> x, y;
            for (const auto& r : rows) {
                if (r.p == p && r.lambda == lambda && r.status == "ok") {
                    x.push_back(std::log(static_cast<double>(r.total_n)));
                    y.push_back(std::log(r.limit->limit_wd2));
                }
            }
            ScalingSlope s{p, lambda, 0.0, 0.0, 0.0, static_cast<int>(x.size())};
            if (x.size() >= 2) {
                s.slope = ols_slope(x, y);
                s.slope_se = x.size() >= 3 ? ols_slope_se(x, y) : 0.0;
                const std::size_t tail = std::min<std::size_t>(3, x.size());
                s.trailing_slope = ols_slope(std::span<const double>(x).last(tail), std::span<const double>(y).last(tail));
            }
            result.slopes.push_back(s);
        }
    }
    result.rows = std::move(rows);
    return result;
}

} // namespace madloop
