#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "madloop/errors.hpp"
#include "madloop/gaussian.hpp"
#include "madloop/gmm.hpp"
#include "madloop/model.hpp"

#include <cmath>
#include <limits>
#include <set>

using namespace madloop;

namespace {

PointMatrix rows(std::initializer_list<std::initializer_list<double>> values) {
    PointMatrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : values) {
        Eigen::Index j = 0;
        for (double v : r) {
            m(i, j++) = v;
        }
        ++i;
    }
    return m;
}

GaussianParams random_gaussian(int d, Rng& rng) {
    Eigen::VectorXd mean(d);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i) {
        mean(i) = 3.0 * rng.normal();
        for (int j = 0; j < d; ++j) {
            a(i, j) = rng.normal();
        }
    }
    Eigen::MatrixXd cov = a * a.transpose() / d + 0.2 * Eigen::MatrixXd::Identity(d, d);
    return {mean, 0.5 * (cov + cov.transpose())};
}

} // namespace

TEST_CASE("GaussianParams invariants") {
    CHECK_THROWS_AS(GaussianParams(Eigen::VectorXd(0), Eigen::MatrixXd(0, 0)), InvalidDataError);
    CHECK_THROWS_AS(GaussianParams(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(3, 3)), InvalidDataError);

    Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(2, 2);
    asym(0, 1) = 1e-9;
    CHECK_THROWS_AS(GaussianParams(Eigen::VectorXd::Zero(2), asym), InvalidDataError);
    asym(0, 1) = 1e-11;
    GaussianParams nearly(Eigen::VectorXd::Zero(2), asym);
    CHECK(nearly.cov()(0, 1) == nearly.cov()(1, 0));

    Eigen::MatrixXd indefinite(2, 2);
    indefinite << 1, 0, 0, -0.1;
    CHECK_THROWS_AS(GaussianParams(Eigen::VectorXd::Zero(2), indefinite), InvalidDataError);

    Eigen::MatrixXd tiny_negative(2, 2);
    tiny_negative << 1, 0, 0, -1e-12;
    GaussianParams clamped(Eigen::VectorXd::Zero(2), tiny_negative);
    CHECK(clamped.was_clamped());
    CHECK(clamped.eigenvalues().minCoeff() == 0.0);

    Eigen::MatrixXd nan_cov = Eigen::MatrixXd::Identity(2, 2);
    nan_cov(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(GaussianParams(Eigen::VectorXd::Zero(2), nan_cov), InvalidDataError);
}

TEST_CASE("fit_gaussian: hand-computed unbiased estimate") {
    const GaussianParams g = fit_gaussian(rows({{0, 0}, {2, 0}, {0, 2}, {2, 2}}));
    CHECK(g.mean()(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.mean()(1) == doctest::Approx(1.0).epsilon(1e-15));
    // sum of squared deviations per axis = 4, divided by n - 1 = 3
    CHECK(g.cov()(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    CHECK(g.cov()(1, 1) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    CHECK(std::abs(g.cov()(0, 1)) < 1e-15);
}

TEST_CASE("fit_gaussian: repeated point gives exactly zero covariance") {
    PointMatrix p(7, 3);
    for (int i = 0; i < 7; ++i) {
        p.row(i) << 0.1, -3.7, 1e5 / 3.0;
    }
    const GaussianParams g = fit_gaussian(p);
    CHECK(g.mean() == p.row(0).transpose());
    CHECK(g.cov().isZero(0.0));
}

TEST_CASE("fit_gaussian: errors") {
    CHECK_THROWS_AS(fit_gaussian(rows({{1, 2}})), InsufficientDataError);
    PointMatrix bad = rows({{1, 2}, {3, 4}});
    bad(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(fit_gaussian(bad), InvalidDataError);
    CHECK_THROWS_AS(SampleSet(bad, Provenance::real, 1), InvalidDataError);
}

TEST_CASE("fit_gaussian: large-sample recovery of N(0, I2)") {
    Rng rng = derive_stream(11, {});
    const GaussianParams g = fit_gaussian(draw_gaussian(GaussianParams::standard(2), 1.0, 100000, rng));
    CHECK(g.mean().cwiseAbs().maxCoeff() < 0.02);
    CHECK((g.cov() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("fit_gaussian: translation shifts the mean and leaves the covariance") {
    Rng rng = derive_stream(12, {});
    const PointMatrix x = draw_gaussian(random_gaussian(4, rng), 1.0, 500, rng);
    Eigen::RowVectorXd c(4);
    c << 1.5, -2.25, 100.0, 0.001;
    const PointMatrix y = x.rowwise() + c;
    const GaussianParams gx = fit_gaussian(x), gy = fit_gaussian(y);
    CHECK((gy.mean() - gx.mean() - c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((gy.cov() - gx.cov()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sample_gaussian: lambda = 0 returns the mean exactly") {
    Eigen::VectorXd mean(2);
    mean << 1, 2;
    Rng rng = derive_stream(13, {});
    const SampleSet s = sample_gaussian(GaussianParams(mean, Eigen::MatrixXd::Identity(2, 2)), 0.0, 3, rng);
    REQUIRE(s.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s.points()(static_cast<Eigen::Index>(i), 0) == 1.0);
        CHECK(s.points()(static_cast<Eigen::Index>(i), 1) == 2.0);
        CHECK(s.provenance(i) == Provenance::synthetic);
    }
}

TEST_CASE("sample_gaussian: lambda scales the variance") {
    Eigen::MatrixXd four(1, 1);
    four << 4.0;
    Rng rng = derive_stream(14, {});
    const GaussianParams g =
        fit_gaussian(draw_gaussian(GaussianParams(Eigen::VectorXd::Zero(1), four), 0.25, 100000, rng));
    CHECK(g.cov()(0, 0) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("sample_gaussian: lambda outside [0, 1] is rejected") {
    Rng rng = derive_stream(15, {});
    const auto g = GaussianParams::standard(2);
    CHECK_THROWS_AS(sample_gaussian(g, -0.1, 5, rng), DomainError);
    CHECK_THROWS_AS(sample_gaussian(g, 1.01, 5, rng), DomainError);
    CHECK_THROWS_AS(sample_gaussian(g, 0.5, 0, rng), DomainError);
}

TEST_CASE("sample_gaussian: rank-deficient covariance stays sampleable") {
    Eigen::MatrixXd cov(2, 2);
    cov << 1, 1, 1, 1;
    Rng rng = derive_stream(16, {});
    const PointMatrix x = draw_gaussian(GaussianParams(Eigen::VectorXd::Zero(2), cov), 1.0, 100, rng);
    CHECK((x.col(0) - x.col(1)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_NOTHROW(fit_gaussian(x));
}

TEST_CASE("unbiasedness: mean fitted covariance tracks lambda * cov within 4 SE") {
    Rng setup = derive_stream(17, {});
    const GaussianParams g = random_gaussian(3, setup);
    for (double lambda : {0.5, 1.0}) {
        constexpr int trials = 10000;
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3), sq = sum;
        for (int t = 0; t < trials; ++t) {
            Rng rng = derive_stream(18, {static_cast<std::uint64_t>(t)});
            const GaussianParams fit = fit_gaussian(draw_gaussian(g, lambda, 50, rng));
            CHECK_FALSE(fit.was_clamped());
            sum += fit.cov();
            sq += fit.cov().cwiseAbs2();
        }
        const Eigen::MatrixXd mean = sum / trials;
        const Eigen::MatrixXd se = ((sq / trials - mean.cwiseAbs2()) * trials / (trials - 1.0) / trials).cwiseSqrt();
        const Eigen::MatrixXd z = ((mean - lambda * g.cov()).cwiseQuotient(se)).cwiseAbs();
        CHECK(z.maxCoeff() < 4.0);
    }
}

TEST_CASE("GmmParams invariants") {
    std::vector<GaussianParams> comps{GaussianParams::standard(2), GaussianParams::standard(2)};
    Eigen::Vector2d w(0.5, 0.5);
    CHECK_NOTHROW(GmmParams(w, comps));
    CHECK_THROWS_AS(GmmParams(Eigen::Vector2d(0.6, 0.5), comps), InvalidDataError);
    CHECK_THROWS_AS(GmmParams(Eigen::Vector2d(1.5, -0.5), comps), InvalidDataError);
    comps[1] = GaussianParams::standard(3);
    CHECK_THROWS_AS(GmmParams(w, comps), InvalidDataError);
}

TEST_CASE("reference grid mixture") {
    const GmmParams g = reference_grid_gmm();
    CHECK(g.size() == 25);
    CHECK(g.weights().sum() == doctest::Approx(1.0).epsilon(1e-15));
    std::set<std::pair<double, double>> centers;
    for (const auto& c : g.components()) {
        CHECK(c.cov().isApprox(0.0025 * Eigen::MatrixXd::Identity(2, 2)));
        centers.insert({c.mean()(0), c.mean()(1)});
    }
    CHECK(centers.size() == 25);
    CHECK(centers.begin()->first == -4.0);
    CHECK(centers.rbegin()->first == 4.0);
    // per-axis variance of {-4,-2,0,2,4} is 8; plus the within-mode 0.0025 on each axis
    CHECK(g.moment_matched().trace() == doctest::Approx(16.005).epsilon(1e-12));
}

TEST_CASE("fit_gmm: two well-separated modes") {
    const double sigma2 = 0.05 * 0.05;
    GmmParams truth(Eigen::Vector2d(0.5, 0.5),
                    {GaussianParams(Eigen::Vector2d(-10, 0), sigma2 * Eigen::MatrixXd::Identity(2, 2)),
                     GaussianParams(Eigen::Vector2d(10, 0), sigma2 * Eigen::MatrixXd::Identity(2, 2))});
    // 500 per mode
    PointMatrix x(1000, 2);
    Rng rng = derive_stream(21, {});
    for (int c = 0; c < 2; ++c) {
        x.middleRows(500 * c, 500) = draw_gaussian(truth.component(static_cast<std::size_t>(c)), 1.0, 500, rng);
    }
    Rng fit_rng = derive_stream(21, {1});
    const EmResult r = fit_gmm(SampleSet(x, Provenance::real, 1), 2, fit_rng);
    std::vector<double> xs{r.model.component(0).mean()(0), r.model.component(1).mean()(0)};
    std::sort(xs.begin(), xs.end());
    CHECK(std::abs(xs[0] + 10) < 0.1);
    CHECK(std::abs(xs[1] - 10) < 0.1);
    for (int c = 0; c < 2; ++c) {
        CHECK(std::abs(r.model.component(static_cast<std::size_t>(c)).mean()(1)) < 0.1);
        CHECK(std::abs(r.model.weights()(c) - 0.5) < 0.05);
    }
    for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
        CHECK(r.log_likelihood[i] >= r.log_likelihood[i - 1]);
    }
}

TEST_CASE("fit_gmm: identical points collapse to the covariance floor") {
    PointMatrix x(10, 2);
    for (int i = 0; i < 10; ++i) {
        x.row(i) << 3.0, -1.0;
    }
    Rng rng = derive_stream(22, {});
    const EmResult r = fit_gmm(SampleSet(x, Provenance::real, 1), 1, rng);
    CHECK(r.model.component(0).mean() == Eigen::Vector2d(3.0, -1.0));
    CHECK(r.model.component(0).cov().isApprox(1e-6 * Eigen::MatrixXd::Identity(2, 2), 1e-9));
}

TEST_CASE("fit_gmm: too few points") {
    Rng rng = derive_stream(23, {});
    const SampleSet s = sample_gaussian(GaussianParams::standard(2), 1.0, 8, rng);
    CHECK_THROWS_AS(fit_gmm(s, 3, rng), InsufficientDataError);  // needs 3 * 3 = 9
}

TEST_CASE("fit_gmm: recovers the 25-mode grid") {
    const GmmParams ref = reference_grid_gmm();
    Rng rng = derive_stream(24, {});
    const SampleSet s = sample_gmm(ref, 1.0, 10000, rng);
    Rng fit_rng = derive_stream(24, {1});
    const EmResult r = fit_gmm(s, 25, fit_rng);
    // brute-force matching: each recovered mean to its nearest true centre, all distinct
    std::set<std::size_t> matched;
    for (const auto& c : r.model.components()) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < ref.size(); ++j) {
            const double d = (c.mean() - ref.component(j).mean()).norm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        CHECK(best_d < 0.2);
        matched.insert(best);
    }
    CHECK(matched.size() == 25);
    for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
        CHECK(r.log_likelihood[i] >= r.log_likelihood[i - 1]);
    }
}

TEST_CASE("sample_gmm: lambda = 0 yields component means at multinomial frequencies") {
    GmmParams g(Eigen::Vector3d(0.2, 0.3, 0.5),
                {GaussianParams(Eigen::Vector2d(0, 0), Eigen::MatrixXd::Identity(2, 2)),
                 GaussianParams(Eigen::Vector2d(5, 5), Eigen::MatrixXd::Identity(2, 2)),
                 GaussianParams(Eigen::Vector2d(-5, 5), Eigen::MatrixXd::Identity(2, 2))});
    Rng rng = derive_stream(25, {});
    constexpr int n = 100000;
    const LabelledSamples s = draw_gmm(g, 0.0, n, rng);
    std::vector<int> counts(3, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = s.labels[static_cast<std::size_t>(i)];
        ++counts[static_cast<std::size_t>(c)];
        CHECK_FALSE((s.points.row(i).transpose() - g.component(static_cast<std::size_t>(c)).mean()).any());
    }
    for (int c = 0; c < 3; ++c) {
        const double p = g.weights()(c);
        CHECK(std::abs(counts[static_cast<std::size_t>(c)] - n * p) < 3.0 * std::sqrt(n * p * (1 - p)));
    }
}

TEST_CASE("sample_gmm: equal-weight grid counts") {
    Rng rng = derive_stream(26, {});
    constexpr int n = 100000;
    const LabelledSamples s = draw_gmm(reference_grid_gmm(), 1.0, n, rng);
    std::vector<int> counts(25, 0);
    for (int c : s.labels) {
        ++counts[static_cast<std::size_t>(c)];
    }
    const double p = 1.0 / 25;
    for (int c : counts) {
        CHECK(std::abs(c - n * p) < 3.0 * std::sqrt(n * p * (1 - p)));
    }
}

TEST_CASE("sample_gmm: one component matches sample_gaussian in distribution") {
    Rng setup = derive_stream(27, {});
    const GaussianParams g = random_gaussian(2, setup);
    const GmmParams m(Eigen::VectorXd::Ones(1), {g});
    Rng a = derive_stream(27, {1}), b = derive_stream(27, {2});
    const GaussianParams fa = fit_gaussian(draw_gmm(m, 0.7, 50000, a).points);
    const GaussianParams fb = fit_gaussian(draw_gaussian(g, 0.7, 50000, b));
    // two independent estimates of the same moments; loose 4-sigma-scale band
    CHECK((fa.mean() - fb.mean()).cwiseAbs().maxCoeff() < 0.05);
    CHECK((fa.cov() - fb.cov()).cwiseAbs().maxCoeff() < 0.08);
    CHECK((fb.cov() - 0.7 * g.cov()).cwiseAbs().maxCoeff() < 0.06);
}

TEST_CASE("model variant helpers") {
    const Model gm = reference_grid_gmm();
    CHECK(model_dim(gm) == 2);
    CHECK(gaussian_summary(gm).trace() == doctest::Approx(16.005));
    Rng rng = derive_stream(28, {});
    const SampleSet s = sample_model(gm, 1.0, 10, rng, Provenance::real, 3);
    CHECK(s.count(Provenance::real) == 10);
    CHECK(s.generation(9) == 3);
}

TEST_CASE("SampleSet bookkeeping") {
    SampleSet pool;
    CHECK(pool.empty());
    pool.append(SampleSet(rows({{1, 2}, {3, 4}}), Provenance::real, 1));
    pool.append(SampleSet(rows({{5, 6}}), Provenance::synthetic, 2));
    CHECK(pool.size() == 3);
    CHECK(pool.count(Provenance::real) == 2);
    CHECK(pool.generation(2) == 2);
    CHECK_THROWS_AS(pool.append(SampleSet(rows({{1, 2, 3}}), Provenance::real, 1)), InvalidDataError);
    CHECK_THROWS_AS(SampleSet(rows({{1, 2}}), Provenance::real, 0), InvalidDataError);
}
