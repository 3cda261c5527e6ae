#include "madloop/sample_set.hpp"

#include "madloop/errors.hpp"

#include <algorithm>
#include <string>

namespace madloop {

namespace {

void check_points(const PointMatrix& points) {
    if (points.rows() < 1 || points.cols() < 1) {
        throw InvalidDataError("sample set needs at least one row and one column");
    }
    if (!points.allFinite()) {
        throw InvalidDataError("sample set contains non-finite values");
    }
}

} // namespace

SampleSet::SampleSet(PointMatrix points, Provenance provenance, int generation)
    : points_(std::move(points)) {
    check_points(points_);
    if (generation < 1) {
        throw InvalidDataError("generation index must be >= 1");
    }
    provenance_.assign(size(), provenance);
    generation_.assign(size(), generation);
}

SampleSet::SampleSet(PointMatrix points, std::vector<Provenance> provenance, std::vector<int> generation)
    : points_(std::move(points)), provenance_(std::move(provenance)), generation_(std::move(generation)) {
    check_points(points_);
    if (provenance_.size() != size() || generation_.size() != size()) {
        throw InvalidDataError("provenance/generation tags must have one entry per row");
    }
    if (std::any_of(generation_.begin(), generation_.end(), [](int g) { return g < 1; })) {
        throw InvalidDataError("generation index must be >= 1");
    }
}

std::size_t SampleSet::count(Provenance p) const {
    return static_cast<std::size_t>(std::count(provenance_.begin(), provenance_.end(), p));
}

void SampleSet::append(const SampleSet& other) {
    if (other.empty()) {
        return;
    }
    if (empty()) {
        *this = other;
        return;
    }
    if (other.dim() != dim()) {
        throw InvalidDataError("cannot append sets of dimension " + std::to_string(other.dim()) +
                               " and " + std::to_string(dim()));
    }
    const Eigen::Index old_rows = points_.rows();
    points_.conservativeResize(old_rows + other.points_.rows(), Eigen::NoChange);
    points_.bottomRows(other.points_.rows()) = other.points_;
    provenance_.insert(provenance_.end(), other.provenance_.begin(), other.provenance_.end());
    generation_.insert(generation_.end(), other.generation_.begin(), other.generation_.end());
}

SampleSet SampleSet::concat(const SampleSet& a, const SampleSet& b) {
    SampleSet out = a;
    out.append(b);
    return out;
}

} // namespace madloop
