#pragma once

#include "madloop/gaussian.hpp"
#include "madloop/gmm.hpp"
#include "madloop/sample_set.hpp"

#include <optional>

namespace madloop {

/// Distance, quality, and diversity of one generation against the reference.
///
/// precision/recall are only present when the run evaluated them at that
/// generation; the modal fields only for mixture references.
struct MetricPanel {
    double wd2 = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    double trace_cov = 0.0;
    std::optional<double> avg_modal_variance;
    std::optional<double> mode_recall;
};

/// Closed-form Wasserstein-2 distance between two Gaussians.
double wasserstein2_gaussian(const GaussianParams& a, const GaussianParams& b);

/// Wasserstein-2 distance between Gaussian fits of two sample sets.
double frechet_distance(const SampleSet& x, const SampleSet& y);

/// Fraction of synthetic points inside some real point's k-NN ball (radius
/// computed within the real set). Requires |real| > k.
double precision(const SampleSet& real, const SampleSet& synthetic, int k = 5);

/// Fraction of real points inside some synthetic point's k-NN ball (radius
/// computed within the synthetic set). Requires |synthetic| > k.
double recall(const SampleSet& real, const SampleSet& synthetic, int k = 5);

struct ModalPanel {
    double trace_cov = 0.0;
    double avg_modal_variance = 0.0;
    double mode_recall = 0.0;
};

/// Diversity panel against a mixture reference: overall trace of covariance,
/// the within-mode covariance trace averaged over occupied modes (samples are
/// assigned to the nearest true component mean), and recall of a reference
/// draw against the samples.
ModalPanel modal_panel(const SampleSet& samples, const GmmParams& reference, const SampleSet& reference_draw,
                       int k = 5);

/// Index of the nearest component mean for each row (ties to the lower index).
std::vector<int> assign_to_nearest_mode(const PointMatrix& points, const GmmParams& reference);

} // namespace madloop
