#include "madloop/metrics.hpp"

#include "madloop/errors.hpp"
#include "madloop/knn.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace madloop {

double wasserstein2_gaussian(const GaussianParams& a, const GaussianParams& b) {
    if (a.dim() != b.dim()) {
        throw DomainError("Wasserstein-2 between Gaussians of dimension " + std::to_string(a.dim()) + " and " +
                          std::to_string(b.dim()));
    }
    const Eigen::MatrixXd root_b = b.sqrt_cov();
    Eigen::MatrixXd inner = root_b * a.cov() * root_b;
    inner = (0.5 * (inner + inner.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(inner, Eigen::EigenvaluesOnly);
    const double cross = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double mean_term = (a.mean() - b.mean()).squaredNorm();
    const double squared = mean_term + a.trace() + b.trace() - 2.0 * cross;
    return std::sqrt(std::max(0.0, squared));
}

double frechet_distance(const SampleSet& x, const SampleSet& y) {
    if (x.size() < 2 || y.size() < 2) {
        throw InsufficientDataError("frechet_distance needs at least two points in each set");
    }
    return wasserstein2_gaussian(fit_gaussian(x), fit_gaussian(y));
}

double precision(const SampleSet& real, const SampleSet& synthetic, int k) {
    if (real.size() <= static_cast<std::size_t>(k)) {
        throw InsufficientDataError("precision needs more than k = " + std::to_string(k) + " real points");
    }
    if (synthetic.empty()) {
        throw InsufficientDataError("precision needs at least one synthetic point");
    }
    return knn_ball_coverage(real.points(), synthetic.points(), k);
}

double recall(const SampleSet& real, const SampleSet& synthetic, int k) {
    if (synthetic.size() <= static_cast<std::size_t>(k)) {
        throw InsufficientDataError("recall needs more than k = " + std::to_string(k) + " synthetic points");
    }
    if (real.empty()) {
        throw InsufficientDataError("recall needs at least one real point");
    }
    return knn_ball_coverage(synthetic.points(), real.points(), k);
}

std::vector<int> assign_to_nearest_mode(const PointMatrix& points, const GmmParams& reference) {
    if (points.cols() != reference.dim()) {
        throw InvalidDataError("sample dimension does not match the reference mixture");
    }
    std::vector<int> labels(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_k = 0;
        for (std::size_t c = 0; c < reference.size(); ++c) {
            const double dist =
                squared_distance(points.row(i).data(), reference.component(c).mean().data(), points.cols());
            if (dist < best) {
                best = dist;
                best_k = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(i)] = best_k;
    }
    return labels;
}

ModalPanel modal_panel(const SampleSet& samples, const GmmParams& reference, const SampleSet& reference_draw,
                       int k) {
    ModalPanel out;
    out.trace_cov = fit_gaussian(samples).trace();

    const PointMatrix& x = samples.points();
    const std::vector<int> labels = assign_to_nearest_mode(x, reference);
    const std::size_t m = reference.size();
    const Eigen::Index d = x.cols();
    std::vector<Eigen::Index> counts(m, 0);
    std::vector<Eigen::VectorXd> sums(m, Eigen::VectorXd::Zero(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        ++counts[c];
        sums[c] += x.row(i).transpose();
    }
    std::vector<double> sq_dev(m, 0.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        const Eigen::VectorXd mean = sums[c] / static_cast<double>(counts[c]);
        sq_dev[c] += (x.row(i).transpose() - mean).squaredNorm();
    }
    double total = 0.0;
    int occupied = 0;
    for (std::size_t c = 0; c < m; ++c) {
        if (counts[c] == 0) {
            continue;
        }
        ++occupied;
        // Unbiased within-cluster covariance trace; singletons contribute zero.
        if (counts[c] >= 2) {
            total += sq_dev[c] / static_cast<double>(counts[c] - 1);
        }
    }
    out.avg_modal_variance = total / occupied;
    out.mode_recall = recall(reference_draw, samples, k);
    return out;
}

} // namespace madloop
