#pragma once

#include "madloop/gaussian.hpp"
#include "madloop/gmm.hpp"

#include <variant>

namespace madloop {

/// A generative model G^t, or a reference distribution P_r.
using Model = std::variant<GaussianParams, GmmParams>;

int model_dim(const Model& model);

/// Single-Gaussian summary: the model itself, or a mixture's moment-matched Gaussian.
GaussianParams gaussian_summary(const Model& model);

/// Draws n points with sampling bias lambda; rows carry the given provenance and generation.
SampleSet sample_model(const Model& model, double lambda, std::size_t n, Rng& rng, Provenance provenance,
                       int generation);

} // namespace madloop
