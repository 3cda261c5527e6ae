#include "madloop/model.hpp"

namespace madloop {

int model_dim(const Model& model) {
    return std::visit([](const auto& m) { return m.dim(); }, model);
}

GaussianParams gaussian_summary(const Model& model) {
    if (const auto* g = std::get_if<GaussianParams>(&model)) {
        return *g;
    }
    return std::get<GmmParams>(model).moment_matched();
}

SampleSet sample_model(const Model& model, double lambda, std::size_t n, Rng& rng, Provenance provenance,
                       int generation) {
    PointMatrix points = std::holds_alternative<GaussianParams>(model)
                             ? draw_gaussian(std::get<GaussianParams>(model), lambda, n, rng)
                             : draw_gmm(std::get<GmmParams>(model), lambda, n, rng).points;
    return SampleSet(std::move(points), provenance, generation);
}

} // namespace madloop
