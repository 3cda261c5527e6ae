#pragma once

#include "madloop/rng.hpp"
#include "madloop/sample_set.hpp"

#include <Eigen/Dense>

#include <cstddef>

namespace madloop {

/// Multivariate normal N(mean, cov) with a cached symmetric eigendecomposition.
///
/// The constructor enforces the model invariants: cov is square, matches the
/// mean, is symmetric within 1e-10 (then exactly symmetrized), and is PSD up to
/// -1e-8 times its largest eigenvalue. Negative eigenvalues inside that
/// tolerance are clamped to zero and the covariance is rebuilt from the
/// clamped spectrum, so rank-deficient covariances stay representable.
class GaussianParams {
public:
    GaussianParams(Eigen::VectorXd mean, Eigen::MatrixXd cov);

    /// N(0, I_d).
    static GaussianParams standard(int d);

    [[nodiscard]] int dim() const { return static_cast<int>(mean_.size()); }
    [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
    [[nodiscard]] const Eigen::MatrixXd& cov() const { return cov_; }
    [[nodiscard]] double trace() const { return cov_.trace(); }

    /// Clamped eigenvalues, ascending.
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    [[nodiscard]] const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }

    /// V diag(sqrt(eig)); satisfies F F^T = cov.
    [[nodiscard]] Eigen::MatrixXd factor() const;
    /// Symmetric square root V diag(sqrt(eig)) V^T.
    [[nodiscard]] Eigen::MatrixXd sqrt_cov() const;

    /// True when the constructor had to clamp a negative eigenvalue.
    [[nodiscard]] bool was_clamped() const { return clamped_; }

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
    bool clamped_ = false;
};

/// Unbiased sample mean and covariance (divides by n - 1).
GaussianParams fit_gaussian(const SampleSet& data);
GaussianParams fit_gaussian(const PointMatrix& points);

/// n i.i.d. draws from N(mean, lambda * cov), tagged synthetic.
SampleSet sample_gaussian(const GaussianParams& model, double lambda, std::size_t n, Rng& rng,
                          int generation = 1);

/// Raw draws; consumes exactly n * d normals from rng regardless of lambda.
PointMatrix draw_gaussian(const GaussianParams& model, double lambda, std::size_t n, Rng& rng);

/// Throws DomainError unless 0 <= lambda <= 1.
void check_lambda(double lambda);

} // namespace madloop
