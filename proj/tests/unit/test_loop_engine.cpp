#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "madloop/diagnostics.hpp"
#include "madloop/errors.hpp"
#include "madloop/loop.hpp"

#include <algorithm>
#include <cmath>

using namespace madloop;

namespace {

LoopConfig fully_synthetic(std::size_t n, double lambda, int T) {
    LoopConfig c;
    c.loop_kind = LoopKind::fully_synthetic;
    c.n_ini = n;
    c.n_s = n;
    c.lambda = lambda;
    c.generations = T;
    c.seed = 1234;
    return c;
}

MetricOptions quiet() {
    MetricOptions m;
    m.pr_stride = 0;
    m.modal_stride = 0;
    return m;
}

const GaussianParams& as_gaussian(const GenerationRecord& r) { return std::get<GaussianParams>(*r.model); }

} // namespace

TEST_CASE("LoopConfig validation") {
    LoopConfig c = fully_synthetic(10, 1.0, 5);
    CHECK_NOTHROW(c.validate());
    c.n_r = 5;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = fully_synthetic(10, 1.5, 5);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = fully_synthetic(10, 1.0, 0);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = fully_synthetic(10, 1.0, 5);
    c.memory_k = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    LoopConfig p;
    p.loop_kind = LoopKind::fresh_data;
    p.n_ini = 100;
    p.generations = 3;
    p.p_fraction = 0.1;
    CHECK_THROWS_AS(p.validate(), ConfigError);  // total_n missing
    p.total_n = 1000;
    CHECK_NOTHROW(p.validate());
    CHECK(p.real_per_generation() == 100);
    CHECK(p.synthetic_per_generation() == 900);
    p.p_fraction = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.p_fraction = 0.5;
    p.n_r = 3;
    CHECK_THROWS_AS(p.validate(), ConfigError);

    LoopConfig aug;
    aug.loop_kind = LoopKind::synthetic_augmentation;
    aug.n_ini = 10;
    aug.n_r = 10;
    aug.generations = 2;
    CHECK_THROWS_AS(aug.validate(), ConfigError);
}

TEST_CASE("lambda = 0 freezes the model at the generation-1 mean") {
    const Model ref = GaussianParams::standard(1);
    const LoopResult r = run_loop(fully_synthetic(20, 0.0, 3), ref, quiet(), {9, {}});
    REQUIRE(r.status == RunStatus::completed);
    REQUIRE(r.records.size() == 3);
    const GaussianParams& g1 = as_gaussian(r.records[0]);
    for (std::size_t t = 1; t < 3; ++t) {
        CHECK(as_gaussian(r.records[t]).cov()(0, 0) == 0.0);
        CHECK(as_gaussian(r.records[t]).mean()(0) == g1.mean()(0));
    }
}

TEST_CASE("fresh data with p = 0.1 splits 1000 into 100 real + 900 synthetic") {
    LoopConfig c;
    c.loop_kind = LoopKind::fresh_data;
    c.n_ini = 1000;
    c.p_fraction = 0.1;
    c.total_n = 1000;
    c.generations = 3;
    const LoopResult r = run_loop(c, GaussianParams::standard(2), quiet(), {1, {}});
    CHECK(r.records[0].n_real == 1000);
    CHECK(r.records[0].n_synthetic == 0);
    for (std::size_t t = 1; t < 3; ++t) {
        CHECK(r.records[t].n_real == 100);
        CHECK(r.records[t].n_synthetic == 900);
    }
}

TEST_CASE("synthetic augmentation: fixed real set plus pool") {
    LoopConfig c;
    c.loop_kind = LoopKind::synthetic_augmentation;
    c.n_ini = 50;
    c.n_s = 70;
    c.generations = 4;
    c.accumulate_synthetic = true;
    const LoopResult acc = run_loop(c, GaussianParams::standard(2), quiet(), {2, {}});
    CHECK(acc.records[3].n_synthetic == 3 * 70);
    CHECK(acc.records[3].n_real == 50);
    CHECK(acc.records[1].n_synthetic == 70);

    c.accumulate_synthetic = false;
    const LoopResult rep = run_loop(c, GaussianParams::standard(2), quiet(), {2, {}});
    CHECK(rep.records[3].n_synthetic == 70);
    CHECK(rep.records[3].n_real == 50);
}

TEST_CASE("K-memory: clipped at t = 2, mixes sources later") {
    const Model ref = GaussianParams::standard(2);
    LoopConfig c = fully_synthetic(400, 1.0, 3);
    LoopState state;
    state.history.push_front(GaussianParams(Eigen::Vector2d(-100, 0), Eigen::MatrixXd::Identity(2, 2)));

    c.memory_k = 3;
    Rng a = derive_stream(5, {});
    const SampleSet with_k3 = assemble_training_set(2, c, state, ref, a);
    c.memory_k = 1;
    Rng b = derive_stream(5, {});
    const SampleSet with_k1 = assemble_training_set(2, c, state, ref, b);
    CHECK(with_k3.points() == with_k1.points());

    state.history.push_front(GaussianParams(Eigen::Vector2d(100, 0), Eigen::MatrixXd::Identity(2, 2)));
    c.memory_k = 2;
    Rng r = derive_stream(6, {});
    const SampleSet mixed = assemble_training_set(3, c, state, ref, r);
    const auto right = (mixed.points().col(0).array() > 0).count();
    // Binomial(400, 1/2): 3 sigma = 30
    CHECK(std::abs(right - 200) < 30);

    LoopState empty;
    CHECK_THROWS_AS(assemble_training_set(2, c, empty, ref, r), InvariantViolation);
}

TEST_CASE("run_trials is deterministic and independent of thread count") {
    LoopConfig c;
    c.loop_kind = LoopKind::fresh_data;
    c.n_ini = 60;
    c.n_r = 30;
    c.n_s = 30;
    c.lambda = 0.9;
    c.generations = 12;
    c.seed = 77;
    MetricOptions m;
    m.pr_stride = 5;
    m.eval_samples = 200;
    const Model ref = GaussianParams::standard(3);
    const auto one = run_trials(c, ref, m, 6, 1);
    const auto again = run_trials(c, ref, m, 6, 1);
    const auto many = run_trials(c, ref, m, 6, 4);
    for (std::size_t i = 0; i < one.size(); ++i) {
        for (std::size_t t = 0; t < one[i].records.size(); ++t) {
            const auto& x = one[i].records[t].metrics;
            CHECK(x.wd2 == again[i].records[t].metrics.wd2);
            CHECK(x.wd2 == many[i].records[t].metrics.wd2);
            CHECK(x.precision == many[i].records[t].metrics.precision);
            CHECK(x.recall == many[i].records[t].metrics.recall);
        }
    }
}

TEST_CASE("precision and recall follow the stride, including t = 1 and t = T") {
    LoopConfig c = fully_synthetic(100, 1.0, 25);
    MetricOptions m;
    m.pr_stride = 10;
    m.eval_samples = 100;
    const LoopResult r = run_loop(c, GaussianParams::standard(2), m, {3, {}});
    for (const auto& rec : r.records) {
        const bool expected = rec.t == 1 || rec.t == 10 || rec.t == 20 || rec.t == 25;
        CHECK(rec.metrics.precision.has_value() == expected);
        CHECK(rec.metrics.recall.has_value() == expected);
    }
}

TEST_CASE("degenerate runs keep the partial trajectory") {
    LoopConfig c = fully_synthetic(10, 1.0, 5);
    c.n_s = 1;  // a Gaussian fit needs two points
    const LoopResult r = run_loop(c, GaussianParams::standard(2), quiet(), {4, {}});
    CHECK(r.status == RunStatus::degenerate);
    CHECK(r.records.size() == 1);
    CHECK(r.message.find("generation 2") != std::string::npos);
}

TEST_CASE("mixture loops run and record modal metrics") {
    LoopConfig c = fully_synthetic(600, 1.0, 3);
    c.family = ModelFamily::gmm(25);
    MetricOptions m;
    m.pr_stride = 1;
    m.eval_samples = 500;
    m.modal_stride = 1;
    m.modal_reference_samples = 1000;
    const LoopResult r = run_loop(c, reference_grid_gmm(), m, {8, {}});
    REQUIRE(r.status == RunStatus::completed);
    for (const auto& rec : r.records) {
        CHECK(std::holds_alternative<GmmParams>(*rec.model));
        CHECK(rec.metrics.avg_modal_variance.has_value());
        CHECK(rec.metrics.mode_recall.has_value());
    }
}

TEST_CASE("fresh data with n_s = 0 has no trend") {
    LoopConfig c;
    c.loop_kind = LoopKind::fresh_data;
    c.n_ini = 50;
    c.n_r = 50;
    c.generations = 40;
    c.seed = 21;
    const auto results = run_trials(c, GaussianParams::standard(2), quiet(), 50);
    const MadnessReport rep = madness_detector(TrajectoryStats::from_results(results), 0);
    CHECK(rep.ci_low <= 0.0);
    CHECK(rep.ci_high >= 0.0);
}

TEST_CASE("fully synthetic loop: the mean drifts away from the reference") {
    LoopConfig c = fully_synthetic(100, 1.0, 20);
    const auto results = run_trials(c, GaussianParams::standard(2), quiet(), 200);
    double d1 = 0, d20 = 0;
    for (const auto& r : results) {
        d1 += as_gaussian(r.records[0]).mean().norm();
        d20 += as_gaussian(r.records[19]).mean().norm();
    }
    CHECK(d20 > d1);
}

// At d = 100 and n = 1000 the trace ratio has variance 2 / (d (n - 1)) ~ 2e-5 per
// generation, so the expected log-trace drift over 50 generations (~5e-4) is far
// below the sampling noise of a 20-trial median (~1e-2). The monotonicity claim
// is checked as stated and allowed to fail.
TEST_CASE("fully synthetic d = 100: smoothed median trace decreases monotonically" * doctest::may_fail()) {
    LoopConfig c = fully_synthetic(1000, 1.0, 50);
    MetricOptions m = quiet();
    m.keep_models = false;
    const auto results = run_trials(c, GaussianParams::standard(100), m, 20);
    std::vector<double> median(50);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v;
        for (const auto& r : results) {
            v.push_back(r.records[static_cast<std::size_t>(t)].metrics.trace_cov);
        }
        std::nth_element(v.begin(), v.begin() + 10, v.end());
        median[static_cast<std::size_t>(t)] = v[10];
    }
    std::vector<double> smooth;
    for (int t = 0; t + 5 <= 50; ++t) {
        double s = 0;
        for (int j = 0; j < 5; ++j) {
            s += median[static_cast<std::size_t>(t + j)];
        }
        smooth.push_back(s / 5);
    }
    int rises = 0;
    for (std::size_t i = 1; i < smooth.size(); ++i) {
        rises += smooth[i] >= smooth[i - 1];
    }
    INFO("smoothed median rises at " << rises << " of " << smooth.size() - 1 << " steps");
    CHECK(rises == 0);
}
