#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cemreg/point_cloud.hpp"

namespace cemreg {

// Exact 1-NN search over a fixed cloud via an axis-aligned splitting tree.
// Immutable after construction; concurrent queries need no synchronization.
// Ties in distance are broken by the lowest point index.
class NeighborIndex {
public:
    struct Result {
        double distance = 0.0;
        std::size_t index = 0;
    };

    explicit NeighborIndex(const PointCloud& cloud) {
        validate_cloud(cloud);
        points_.assign(cloud.points.begin(), cloud.points.end());
        order_.resize(points_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::uint32_t>(i);
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        root_ = build(0, static_cast<std::uint32_t>(order_.size()));
    }

    std::size_t size() const { return points_.size(); }

    Result nearest(const Eigen::Vector3d& q) const {
        if (!all_finite(q)) throw std::invalid_argument("query point must be finite");
        Best best;
        search(root_, q, best);
        return {std::sqrt(best.dist2), best.index};
    }

    // Squared distance only; skips the sqrt on hot paths.
    double nearest_dist2(const Eigen::Vector3d& q) const {
        Best best;
        search(root_, q, best);
        return best.dist2;
    }

private:
    static constexpr std::uint32_t kLeafSize = 8;

    struct Node {
        double split = 0.0;
        std::int32_t axis = -1;  // -1 marks a leaf
        std::uint32_t left = 0, right = 0;    // children for interior nodes
        std::uint32_t begin = 0, end = 0;     // order_ range for leaves
    };

    struct Best {
        double dist2 = std::numeric_limits<double>::infinity();
        std::size_t index = std::numeric_limits<std::size_t>::max();
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
        Node node;
        if (end - begin <= kLeafSize) {
            node.begin = begin;
            node.end = end;
            nodes_.push_back(node);
            return static_cast<std::uint32_t>(nodes_.size() - 1);
        }
        // Split the widest dimension at the median.
        Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
        for (std::uint32_t i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        const std::uint32_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             return points_[a][axis] < points_[b][axis];
                         });
        node.axis = axis;
        node.split = points_[order_[mid]][axis];
        const std::uint32_t self = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back(node);
        const std::uint32_t left = build(begin, mid);
        const std::uint32_t right = build(mid, end);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void search(std::uint32_t node_id, const Eigen::Vector3d& q, Best& best) const {
        const Node& node = nodes_[node_id];
        if (node.axis < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::size_t idx = order_[i];
                const double d2 = (points_[idx] - q).squaredNorm();
                if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index)) {
                    best.dist2 = d2;
                    best.index = idx;
                }
            }
            return;
        }
        const double delta = q[node.axis] - node.split;
        const std::uint32_t near = delta < 0.0 ? node.left : node.right;
        const std::uint32_t far = delta < 0.0 ? node.right : node.left;
        search(near, q, best);
        if (delta * delta <= best.dist2) search(far, q, best);
    }

    std::vector<Eigen::Vector3d> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::uint32_t root_ = 0;
};

}  // namespace cemreg
