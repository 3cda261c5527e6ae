#pragma once

#include "madloop/gaussian.hpp"
#include "madloop/rng.hpp"
#include "madloop/sample_set.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace madloop {

/// Finite mixture of Gaussians sharing one dimension.
class GmmParams {
public:
    /// weights must be nonnegative and sum to 1 within 1e-12.
    GmmParams(Eigen::VectorXd weights, std::vector<GaussianParams> components);

    [[nodiscard]] int dim() const { return components_.front().dim(); }
    [[nodiscard]] std::size_t size() const { return components_.size(); }
    [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }
    [[nodiscard]] const std::vector<GaussianParams>& components() const { return components_; }
    [[nodiscard]] const GaussianParams& component(std::size_t i) const { return components_[i]; }

    /// Gaussian with the mixture's overall mean and covariance (law of total variance).
    [[nodiscard]] GaussianParams moment_matched() const;

private:
    Eigen::VectorXd weights_;
    std::vector<GaussianParams> components_;
};

struct EmConfig {
    double tolerance = 1e-6;        ///< stop when mean per-sample log-likelihood gains less than this
    int max_iterations = 500;
    double covariance_floor = 1e-6; ///< added to every component covariance diagonal in the M-step
    double min_weight = 1e-8;       ///< components below this weight are re-seeded
    int kmeans_iterations = 100;    ///< Lloyd refinement after k-means++ seeding
};

struct EmResult {
    GmmParams model;
    /// Mean per-sample log-likelihood after each E-step since the last re-seed.
    std::vector<double> log_likelihood;
    int iterations = 0;
    int reseeds = 0;
    bool converged = false;
};

/// Maximum-likelihood mixture fit by EM from a k-means++ start.
/// Requires n >= m * (d + 1).
EmResult fit_gmm(const SampleSet& data, int components, Rng& rng, const EmConfig& config = {});

struct LabelledSamples {
    PointMatrix points;
    std::vector<int> labels;
};

/// Component index ~ weights, then a draw from N(mean_c, lambda * cov_c).
LabelledSamples draw_gmm(const GmmParams& model, double lambda, std::size_t n, Rng& rng);
SampleSet sample_gmm(const GmmParams& model, double lambda, std::size_t n, Rng& rng, int generation = 1);

/// 5x5 grid of isotropic modes at {-4,-2,0,2,4}^2, sigma = 0.05, equal weights.
GmmParams reference_grid_gmm();

} // namespace madloop
