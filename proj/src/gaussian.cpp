#include "madloop/gaussian.hpp"

#include "madloop/errors.hpp"

#include <cmath>
#include <string>

namespace madloop {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr double kPsdTolerance = 1e-8;

} // namespace

GaussianParams::GaussianParams(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
    const Eigen::Index d = mean_.size();
    if (d < 1) {
        throw InvalidDataError("Gaussian dimension must be >= 1");
    }
    if (cov_.rows() != d || cov_.cols() != d) {
        throw InvalidDataError("covariance is " + std::to_string(cov_.rows()) + "x" +
                               std::to_string(cov_.cols()) + " but mean has length " + std::to_string(d));
    }
    if (!mean_.allFinite() || !cov_.allFinite()) {
        throw InvalidDataError("Gaussian parameters must be finite");
    }
    if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
        throw InvalidDataError("covariance is not symmetric");
    }
    cov_ = (0.5 * (cov_ + cov_.transpose())).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_);
    if (solver.info() != Eigen::Success) {
        throw InvalidDataError("eigendecomposition of covariance failed");
    }
    eigenvalues_ = solver.eigenvalues();
    eigenvectors_ = solver.eigenvectors();

    const double largest = eigenvalues_.cwiseAbs().maxCoeff();
    if (eigenvalues_(0) < -kPsdTolerance * largest) {
        throw InvalidDataError("covariance is not positive semi-definite (min eigenvalue " +
                               std::to_string(eigenvalues_(0)) + ")");
    }
    if (eigenvalues_(0) < 0.0) {
        eigenvalues_ = eigenvalues_.cwiseMax(0.0);
        cov_ = eigenvectors_ * eigenvalues_.asDiagonal() * eigenvectors_.transpose();
        cov_ = (0.5 * (cov_ + cov_.transpose())).eval();
        clamped_ = true;
    }
}

GaussianParams GaussianParams::standard(int d) {
    return GaussianParams(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
}

Eigen::MatrixXd GaussianParams::factor() const {
    return eigenvectors_ * eigenvalues_.cwiseSqrt().asDiagonal();
}

Eigen::MatrixXd GaussianParams::sqrt_cov() const {
    return eigenvectors_ * eigenvalues_.cwiseSqrt().asDiagonal() * eigenvectors_.transpose();
}

GaussianParams fit_gaussian(const PointMatrix& points) {
    const Eigen::Index n = points.rows();
    if (n < 2) {
        throw InsufficientDataError("fit_gaussian needs n >= 2 rows, got " + std::to_string(n));
    }
    if (!points.allFinite()) {
        throw InvalidDataError("fit_gaussian input contains non-finite values");
    }
    // Accumulate relative to the first row: identical rows give an exact mean
    // and an exactly zero covariance.
    const Eigen::RowVectorXd offset = points.row(0);
    const Eigen::RowVectorXd shift = (points.rowwise() - offset).colwise().mean();
    Eigen::VectorXd mean = (offset + shift).transpose();
    const Eigen::MatrixXd centered = points.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(points.cols(), points.cols());
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    cov = Eigen::MatrixXd(cov.selfadjointView<Eigen::Lower>());
    cov /= static_cast<double>(n - 1);
    return GaussianParams(std::move(mean), std::move(cov));
}

GaussianParams fit_gaussian(const SampleSet& data) {
    return fit_gaussian(data.points());
}

void check_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw DomainError("sampling bias lambda must lie in [0, 1], got " + std::to_string(lambda));
    }
}

PointMatrix draw_gaussian(const GaussianParams& model, double lambda, std::size_t n, Rng& rng) {
    check_lambda(lambda);
    if (n < 1) {
        throw DomainError("sample count must be >= 1");
    }
    const int d = model.dim();
    PointMatrix z(static_cast<Eigen::Index>(n), d);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (int j = 0; j < d; ++j) {
            z(i, j) = rng.normal();
        }
    }
    const Eigen::MatrixXd factor = std::sqrt(lambda) * model.factor();
    PointMatrix out = z * factor.transpose();
    out.rowwise() += model.mean().transpose();
    return out;
}

SampleSet sample_gaussian(const GaussianParams& model, double lambda, std::size_t n, Rng& rng,
                          int generation) {
    return SampleSet(draw_gaussian(model, lambda, n, rng), Provenance::synthetic, generation);
}

} // namespace madloop
