#include "madloop/knn.hpp"

#include "madloop/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace madloop {

KdTree::KdTree(const PointMatrix& points, int leaf_size)
    : points_(points), dim_(points.cols()), leaf_size_(std::max(1, leaf_size)) {
    order_.resize(static_cast<std::size_t>(points.rows()));
    std::iota(order_.begin(), order_.end(), Eigen::Index{0});
    nodes_.reserve(2 * order_.size() / static_cast<std::size_t>(leaf_size_) + 2);
    if (!order_.empty()) {
        build(0, points.rows());
    }
}

int KdTree::build(Eigen::Index begin, Eigen::Index end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo.assign(static_cast<std::size_t>(dim_), std::numeric_limits<double>::infinity());
    node.hi.assign(static_cast<std::size_t>(dim_), -std::numeric_limits<double>::infinity());
    for (Eigen::Index i = begin; i < end; ++i) {
        const double* p = points_.row(order_[static_cast<std::size_t>(i)]).data();
        for (Eigen::Index j = 0; j < dim_; ++j) {
            node.lo[static_cast<std::size_t>(j)] = std::min(node.lo[static_cast<std::size_t>(j)], p[j]);
            node.hi[static_cast<std::size_t>(j)] = std::max(node.hi[static_cast<std::size_t>(j)], p[j]);
        }
    }
    if (end - begin > leaf_size_) {
        Eigen::Index axis = 0;
        double spread = -1.0;
        for (Eigen::Index j = 0; j < dim_; ++j) {
            const double s = node.hi[static_cast<std::size_t>(j)] - node.lo[static_cast<std::size_t>(j)];
            if (s > spread) {
                spread = s;
                axis = j;
            }
        }
        if (spread > 0.0) {
            const Eigen::Index mid = begin + (end - begin) / 2;
            std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                             [&](Eigen::Index a, Eigen::Index b) {
                                 const double pa = points_(a, axis);
                                 const double pb = points_(b, axis);
                                 return pa < pb || (pa == pb && a < b);
                             });
            node.left = build(begin, mid);
            node.right = build(mid, end);
        }
    }
    nodes_[static_cast<std::size_t>(id)] = std::move(node);
    return id;
}

double KdTree::box_lower_bound(const Node& node, const double* q) const {
    double s = 0.0;
    for (Eigen::Index j = 0; j < dim_; ++j) {
        const double lo = node.lo[static_cast<std::size_t>(j)];
        const double hi = node.hi[static_cast<std::size_t>(j)];
        double diff = 0.0;
        if (q[j] < lo) {
            diff = q[j] - lo;
        } else if (q[j] > hi) {
            diff = q[j] - hi;
        }
        s += diff * diff;
    }
    return s;
}

void KdTree::knn(int node_id, const double* q, Eigen::Index self, int k, std::vector<double>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (static_cast<int>(heap.size()) == k && box_lower_bound(node, q) > heap.front()) {
        return;
    }
    if (node.left < 0) {
        for (Eigen::Index i = node.begin; i < node.end; ++i) {
            const Eigen::Index idx = order_[static_cast<std::size_t>(i)];
            if (idx == self) {
                continue;
            }
            const double dist = squared_distance(q, points_.row(idx).data(), dim_);
            if (static_cast<int>(heap.size()) < k) {
                heap.push_back(dist);
                std::push_heap(heap.begin(), heap.end());
            } else if (dist < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = dist;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        return;
    }
    const Node& left = nodes_[static_cast<std::size_t>(node.left)];
    const Node& right = nodes_[static_cast<std::size_t>(node.right)];
    if (box_lower_bound(left, q) <= box_lower_bound(right, q)) {
        knn(node.left, q, self, k, heap);
        knn(node.right, q, self, k, heap);
    } else {
        knn(node.right, q, self, k, heap);
        knn(node.left, q, self, k, heap);
    }
}

std::vector<double> KdTree::kth_neighbor_sq_distances(int k) const {
    const auto n = static_cast<Eigen::Index>(order_.size());
    if (k < 1 || n <= k) {
        throw InsufficientDataError("k-th neighbour radius needs more than k = " + std::to_string(k) +
                                    " points, got " + std::to_string(n));
    }
    std::vector<double> out(static_cast<std::size_t>(n));
    std::vector<double> heap;
    heap.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        heap.clear();
        knn(0, points_.row(i).data(), i, k, heap);
        out[static_cast<std::size_t>(i)] = heap.front();
    }
    return out;
}

double KdTree::fill_radii(int node_id) {
    Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.left < 0) {
        double m = 0.0;
        for (Eigen::Index i = node.begin; i < node.end; ++i) {
            m = std::max(m, sq_radii_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
        }
        node.max_sq_radius = m;
    } else {
        const double l = fill_radii(node.left);
        const double r = fill_radii(node.right);
        nodes_[static_cast<std::size_t>(node_id)].max_sq_radius = std::max(l, r);
    }
    return nodes_[static_cast<std::size_t>(node_id)].max_sq_radius;
}

void KdTree::set_sq_radii(std::vector<double> sq_radii) {
    if (sq_radii.size() != order_.size()) {
        throw InvalidDataError("need one radius per indexed point");
    }
    sq_radii_ = std::move(sq_radii);
    if (!nodes_.empty()) {
        fill_radii(0);
    }
}

bool KdTree::covers(int node_id, const double* q) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (box_lower_bound(node, q) > node.max_sq_radius) {
        return false;
    }
    if (node.left < 0) {
        for (Eigen::Index i = node.begin; i < node.end; ++i) {
            const Eigen::Index idx = order_[static_cast<std::size_t>(i)];
            if (squared_distance(q, points_.row(idx).data(), dim_) <= sq_radii_[static_cast<std::size_t>(idx)]) {
                return true;
            }
        }
        return false;
    }
    const Node& left = nodes_[static_cast<std::size_t>(node.left)];
    const Node& right = nodes_[static_cast<std::size_t>(node.right)];
    if (box_lower_bound(left, q) <= box_lower_bound(right, q)) {
        return covers(node.left, q) || covers(node.right, q);
    }
    return covers(node.right, q) || covers(node.left, q);
}

bool KdTree::covers(const double* query) const {
    if (sq_radii_.size() != order_.size()) {
        throw InvariantViolation("KdTree::covers called before set_sq_radii");
    }
    return !nodes_.empty() && covers(0, query);
}

double knn_ball_coverage(const PointMatrix& centers, const PointMatrix& queries, int k) {
    if (centers.cols() != queries.cols()) {
        throw InvalidDataError("coverage query dimension mismatch");
    }
    if (queries.rows() < 1) {
        throw InsufficientDataError("coverage needs at least one query point");
    }
    KdTree tree(centers);
    tree.set_sq_radii(tree.kth_neighbor_sq_distances(k));
    Eigen::Index covered = 0;
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        if (tree.covers(queries.row(i).data())) {
            ++covered;
        }
    }
    return static_cast<double>(covered) / static_cast<double>(queries.rows());
}

} // namespace madloop
