#pragma once

// Exact k-nearest-neighbour radii and ball-coverage queries over a kd-tree.
//
// All distances are squared Euclidean, accumulated over coordinates in index
// order by squared_distance(). Tree pruning compares per-coordinate lower
// bounds accumulated in the same order, which are never larger than the
// corresponding exact sums under IEEE rounding, so results are identical to a
// brute-force scan using squared_distance().

#include "madloop/sample_set.hpp"

#include <span>
#include <vector>

namespace madloop {

inline double squared_distance(const double* a, const double* b, Eigen::Index d) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

class KdTree {
public:
    explicit KdTree(const PointMatrix& points, int leaf_size = 16);

    /// Squared distance from each indexed point to its k-th nearest other point
    /// (the point itself is excluded by index; duplicates count at distance 0).
    [[nodiscard]] std::vector<double> kth_neighbor_sq_distances(int k) const;

    /// Attach one squared radius per indexed point, enabling covers().
    void set_sq_radii(std::vector<double> sq_radii);

    /// True iff some indexed point y has squared_distance(q, y) <= r(y)^2.
    [[nodiscard]] bool covers(const double* query) const;

private:
    struct Node {
        Eigen::Index begin = 0;
        Eigen::Index end = 0;
        int left = -1;
        int right = -1;
        std::vector<double> lo;
        std::vector<double> hi;
        double max_sq_radius = 0.0;
    };

    int build(Eigen::Index begin, Eigen::Index end);
    double box_lower_bound(const Node& node, const double* q) const;
    void knn(int node, const double* q, Eigen::Index self, int k, std::vector<double>& heap) const;
    double fill_radii(int node);
    bool covers(int node, const double* q) const;

    const PointMatrix& points_;
    Eigen::Index dim_;
    int leaf_size_;
    std::vector<Eigen::Index> order_;
    std::vector<Node> nodes_;
    std::vector<double> sq_radii_;
};

/// Fraction of query rows inside the union of balls around centers with radius
/// equal to each center's k-th nearest-neighbour distance within centers.
double knn_ball_coverage(const PointMatrix& centers, const PointMatrix& queries, int k);

} // namespace madloop
