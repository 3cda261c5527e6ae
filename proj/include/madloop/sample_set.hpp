#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace madloop {

/// Row-major n x d point matrix; one sample per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Provenance : std::uint8_t { real, synthetic };

/// A training or evaluation set with per-row provenance and generation index.
///
/// Constructed sets have n >= 1 finite rows. A default-constructed set is the
/// empty pool used as an accumulator; it adopts the dimension of the first
/// set appended to it.
class SampleSet {
public:
    SampleSet() = default;
    SampleSet(PointMatrix points, Provenance provenance, int generation);
    SampleSet(PointMatrix points, std::vector<Provenance> provenance, std::vector<int> generation);

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
    [[nodiscard]] int dim() const { return static_cast<int>(points_.cols()); }
    [[nodiscard]] bool empty() const { return points_.rows() == 0; }

    [[nodiscard]] const PointMatrix& points() const { return points_; }
    [[nodiscard]] Provenance provenance(std::size_t row) const { return provenance_[row]; }
    [[nodiscard]] int generation(std::size_t row) const { return generation_[row]; }
    [[nodiscard]] std::size_t count(Provenance p) const;

    void append(const SampleSet& other);
    [[nodiscard]] static SampleSet concat(const SampleSet& a, const SampleSet& b);

private:
    PointMatrix points_;
    std::vector<Provenance> provenance_;
    std::vector<int> generation_;
};

} // namespace madloop
