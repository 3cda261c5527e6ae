#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "madloop/ess.hpp"
#include "madloop/stats.hpp"

#include <cmath>

using namespace madloop;

namespace {

LoopConfig fresh(std::size_t n_ini, std::size_t n_r, std::size_t n_s, double lambda, int T, std::uint64_t seed) {
    LoopConfig c;
    c.loop_kind = LoopKind::fresh_data;
    c.n_ini = n_ini;
    c.n_r = n_r;
    c.n_s = n_s;
    c.lambda = lambda;
    c.generations = T;
    c.seed = seed;
    return c;
}

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

BaselineCurve synthetic_curve() {
    BaselineCurve c;
    c.n = {10, 100, 500, 1000, 10000};
    for (std::size_t n : c.n) {
        c.mean_wd2.push_back(3.0 / std::sqrt(static_cast<double>(n)));
        c.se.push_back(0.001);
    }
    c.smoothed = c.mean_wd2;
    c.trials = 10;
    return c;
}

} // namespace

TEST_CASE("log grid") {
    const auto g = log_grid(20, 20000, 31);
    CHECK(g.front() == 20);
    CHECK(g.back() == 20000);
    for (std::size_t i = 1; i < g.size(); ++i) {
        CHECK(g[i] > g[i - 1]);
    }
    CHECK(log_grid(10, 10000, 4) == std::vector<std::size_t>{10, 100, 1000, 10000});
}

TEST_CASE("baseline: d = 1 curve decreases over decades") {
    const BaselineCurve c = build_baseline(GaussianParams::standard(1), {10, 100, 1000, 10000}, 200, 41);
    for (std::size_t i = 1; i < c.n.size(); ++i) {
        CHECK(c.mean_wd2[i] < c.mean_wd2[i - 1]);
        CHECK(c.smoothed[i] < c.smoothed[i - 1]);
    }
    for (double se : c.se) {
        CHECK(se > 0.0);
    }
}

TEST_CASE("baseline: large-sample floor") {
    const BaselineCurve c = build_baseline(GaussianParams::standard(1), {1000, 1000000}, 10, 42);
    CHECK(c.mean_wd2.back() < 0.01);
}

TEST_CASE("baseline: disjoint seeds agree within 2 SE") {
    const std::vector<std::size_t> grid{10, 100, 1000};
    const BaselineCurve a = build_baseline(GaussianParams::standard(2), grid, 200, 43);
    const BaselineCurve b = build_baseline(GaussianParams::standard(2), grid, 200, 44);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(std::abs(a.mean_wd2[i] - b.mean_wd2[i]) < 2.0 * combined(a.se[i], b.se[i]));
    }
}

TEST_CASE("baseline: grid points keep their streams when the grid grows") {
    const BaselineCurve a = build_baseline(GaussianParams::standard(2), {50, 500}, 5, 45);
    const BaselineCurve b = build_baseline(GaussianParams::standard(2), {50, 200, 500}, 5, 45);
    CHECK(a.mean_wd2[0] == b.mean_wd2[0]);
    CHECK(a.mean_wd2[1] == b.mean_wd2[2]);
}

TEST_CASE("baseline: an unresolvable curve is a data-quality error") {
    // Neighbouring n values are indistinguishable with two trials; some seeds
    // must produce a rise that smoothing flattens.
    int rejected = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        try {
            build_baseline(GaussianParams::standard(1), {10000, 10001, 10002}, 2, seed);
        } catch (const DataQualityError&) {
            ++rejected;
        }
    }
    CHECK(rejected > 0);
    CHECK_THROWS_AS(build_baseline(GaussianParams::standard(1), {100, 50}, 5, 1), DomainError);
}

TEST_CASE("ESS inversion: knots are fixed points") {
    const BaselineCurve c = synthetic_curve();
    const EssResult r = effective_sample_size(c.smoothed[2], 0.0, c, 250);
    CHECK(r.n_e == doctest::Approx(500.0).epsilon(1e-12));
    CHECK(r.ratio == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.admissible);
    CHECK(r.range == GridRange::inside);
    for (std::size_t i = 0; i < c.n.size(); ++i) {
        const EssResult k = effective_sample_size(c.smoothed[i], 0.0, c, c.n[i]);
        CHECK(std::abs(k.n_e / static_cast<double>(c.n[i]) - 1.0) < 0.01);
        CHECK(k.admissible == (k.ratio >= 1.0));
    }
}

TEST_CASE("ESS inversion: power law is linear in log-log") {
    const BaselineCurve c = synthetic_curve();
    // 3 / sqrt(n) is exactly linear in log-log, so any interior point inverts exactly
    const EssResult r = effective_sample_size(3.0 / std::sqrt(2000.0), 0.0, c, 1000);
    CHECK(r.n_e == doctest::Approx(2000.0).epsilon(1e-9));
}

TEST_CASE("ESS inversion: clamping outside the grid") {
    const BaselineCurve c = synthetic_curve();
    const EssResult hi = effective_sample_size(10.0, 0.0, c, 100);
    CHECK(hi.range == GridRange::above_grid);
    CHECK(hi.n_e == 10.0);
    CHECK_FALSE(hi.admissible);
    const EssResult lo = effective_sample_size(1e-4, 0.0, c, 100);
    CHECK(lo.range == GridRange::below_grid);
    CHECK(lo.n_e == 10000.0);
}

TEST_CASE("limiting distance with n_s = 0 equals the baseline at n_r") {
    const GaussianParams ref = GaussianParams::standard(10);
    const LimitEstimate est = limiting_distance(fresh(100, 100, 0, 1.0, 50, 46), ref, 20);
    CHECK(est.converged);
    CHECK(est.window == 10);
    const BaselineCurve c = build_baseline(ref, log_grid(20, 2000, 21), 100, 47);
    std::size_t at = 0;
    while (c.n[at] < 100) {
        ++at;
    }
    REQUIRE(c.n[at] == 100);
    CHECK(std::abs(est.limit_wd2 - c.mean_wd2[at]) < 2.0 * combined(est.se, c.se[at]));
    const EssResult r = effective_sample_size(est.limit_wd2, est.se, c, 100);
    CHECK(std::abs(r.ratio - 1.0) < 0.05);
}

TEST_CASE("limiting distance: n_ini independence and bias ordering") {
    const GaussianParams ref = GaussianParams::standard(20);
    const LimitEstimate small = limiting_distance(fresh(100, 100, 900, 1.0, 50, 48), ref, 10);
    const LimitEstimate large = limiting_distance(fresh(1000, 100, 900, 1.0, 50, 48), ref, 10);
    CHECK(std::abs(small.limit_wd2 - large.limit_wd2) < 2.0 * combined(small.se, large.se));
    const LimitEstimate biased = limiting_distance(fresh(1000, 100, 900, 0.8, 50, 48), ref, 10);
    CHECK(biased.limit_wd2 - large.limit_wd2 > 2.0 * combined(biased.se, large.se));
}

TEST_CASE("limiting distance: a loop still moving is not converged") {
    try {
        limiting_distance(fresh(100000, 10, 1000, 1.0, 10, 49), GaussianParams::standard(5), 10);
        FAIL("expected NotConvergedError");
    } catch (const NotConvergedError& e) {
        CHECK_FALSE(e.estimate().converged);
        CHECK(e.estimate().slope > 0.0);
        CHECK(e.estimate().config.generations == 10);
    }
}

TEST_CASE("generation rule") {
    const GenerationRule rule;
    CHECK(rule.generations(100, 100) == 50);
    CHECK(rule.generations(100, 4000) == 205);
    CHECK_THROWS_AS(rule.generations(0, 10), DomainError);
}

TEST_CASE("sweep: cells are order- and thread-independent and reproducible alone") {
    SweepAxes axes;
    axes.n_r = {50};
    axes.n_s = {0, 50, 200};
    axes.lambda = {1.0, 0.7};
    SweepOptions options;
    options.trials = 6;
    options.baseline_grid = log_grid(10, 3000, 16);
    options.baseline_trials = 20;
    const GaussianParams ref = GaussianParams::standard(5);
    const SweepResult a = sweep_phase_diagram(axes, ref, options, 50, 1);
    const SweepResult b = sweep_phase_diagram(axes, ref, options, 50, 3);
    SweepAxes reversed = axes;
    std::reverse(reversed.n_s.begin(), reversed.n_s.end());
    std::reverse(reversed.lambda.begin(), reversed.lambda.end());
    const SweepResult c = sweep_phase_diagram(reversed, ref, options, 50, 1);
    REQUIRE(a.cells.size() == 6);
    for (const auto& cell : a.cells) {
        bool found = false;
        for (const auto& other : c.cells) {
            if (other.n_s == cell.n_s && other.lambda == cell.lambda) {
                found = true;
                CHECK(other.limit->limit_wd2 == cell.limit->limit_wd2);
            }
        }
        CHECK(found);
        const SweepCell alone = run_sweep_cell(cell.config, ref, a.baseline, options);
        CHECK(alone.limit->limit_wd2 == cell.limit->limit_wd2);
    }
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        CHECK(a.cells[i].limit->limit_wd2 == b.cells[i].limit->limit_wd2);
    }
    // cells differing only in lambda share their stream
    CHECK(a.cells[0].config.seed == a.cells[3].config.seed);
    CHECK(a.cells[0].config.seed != a.cells[1].config.seed);
}

TEST_CASE("admissibility frontier") {
    std::vector<SweepCell> cells;
    auto add = [&](std::size_t n_s, double lambda, std::optional<bool> admissible) {
        SweepCell c;
        c.n_r = 100;
        c.n_s = n_s;
        c.lambda = lambda;
        if (admissible) {
            c.ess = EssResult{};
            c.ess->admissible = *admissible;
        } else {
            c.status = "not_converged";
        }
        cells.push_back(c);
    };
    add(400, 1.0, true);
    add(100, 1.0, true);
    add(200, 1.0, true);
    add(100, 0.7, true);
    add(200, 0.7, false);
    add(400, 0.7, true);
    add(100, 0.5, false);
    add(100, 0.9, true);
    add(200, 0.9, std::nullopt);
    const auto f = admissibility_frontier(cells);
    REQUIRE(f.size() == 4);
    CHECK(f[0].lambda == 0.5);
    CHECK_FALSE(f[0].max_admissible_n_s.has_value());
    CHECK(*f[1].max_admissible_n_s == 100);
    CHECK(*f[2].max_admissible_n_s == 100);
    CHECK(*f[3].max_admissible_n_s == 400);
}

TEST_CASE("scaling study") {
    const GaussianParams ref = GaussianParams::standard(10);
    GenerationRule rule;
    const std::vector<std::size_t> ns{100, 300, 1000, 3000, 10000};
    const ScalingResult r = scaling_study({0.1, 0.25, 1.0}, ns, {1.0, 0.9}, ref, 10, rule, 51);
    auto row = [&](double p, double lambda, std::size_t n) -> const ScalingRow& {
        for (const auto& x : r.rows) {
            if (x.p == p && x.lambda == lambda && x.total_n == n) {
                return x;
            }
        }
        FAIL("missing row");
        return r.rows.front();
    };
    auto slope = [&](double p, double lambda) -> const ScalingSlope& {
        for (const auto& s : r.slopes) {
            if (s.p == p && s.lambda == lambda) {
                return s;
            }
        }
        FAIL("missing slope");
        return r.slopes.front();
    };
    for (const auto& x : r.rows) {
        CHECK(x.status == "ok");
    }

    // p = 100% is plain refitting: compare against the baseline's own log-log slope
    const BaselineCurve base = build_baseline(ref, ns, 40, 52);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        lx.push_back(std::log(static_cast<double>(ns[i])));
        ly.push_back(std::log(base.mean_wd2[i]));
    }
    const double base_slope = ols_slope(lx, ly);
    const ScalingSlope& full = slope(1.0, 1.0);
    CHECK(std::abs(full.slope - base_slope) < 2.0 * combined(full.slope_se, ols_slope_se(lx, ly)));

    for (std::size_t n : ns) {
        const ScalingRow& hi = row(0.25, 1.0, n);
        const ScalingRow& lo = row(1.0, 1.0, n);
        CHECK(hi.limit->limit_wd2 - lo.limit->limit_wd2 > 2.0 * combined(hi.limit->se, lo.limit->se));
    }
    CHECK(std::abs(slope(0.1, 0.9).trailing_slope) < std::abs(slope(0.1, 1.0).trailing_slope));
}
