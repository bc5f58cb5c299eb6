// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "sdfreg/errors.hpp"
#include "sdfreg/geometry.hpp"

namespace sdfreg {

/// 3D KD-tree for exact nearest-neighbor lookups. Pruning uses strict
/// inequalities and distance ties resolve to the smallest point index, so
/// nearest() agrees exactly with a linear scan in index order.
class KdTree3 {
public:
    explicit KdTree3(const std::vector<Vec3>& points) : pts_(points) {
        if (pts_.empty()) throw EmptyCloud("KdTree3: empty point set");
        order_.resize(pts_.size());
        for (std::size_t i = 0; i < pts_.size(); ++i) order_[i] = static_cast<int>(i);
        nodes_.reserve(2 * pts_.size() / kLeafSize + 1);
        build(0, static_cast<int>(pts_.size()), 0);
    }

    struct Nearest {
        int index = -1;
        double dist_sq = std::numeric_limits<double>::infinity();
    };

    Nearest nearest(const Vec3& q) const {
        Nearest best;
        search(0, q, best);
        return best;
    }

private:
    struct Node {
        double split = 0.0;
        int axis = 0;
        int left = -1, right = -1;
        int first = 0, count = 0;  // leaf when count > 0
    };

    int build(int first, int last, int depth) {
        const int node_idx = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        const int count = last - first;
        if (count <= kLeafSize) {
            nodes_[static_cast<std::size_t>(node_idx)].first = first;
            nodes_[static_cast<std::size_t>(node_idx)].count = count;
            return node_idx;
        }
        const int axis = depth % 3;
        const int mid = first + count / 2;
        std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + last,
                         [&](int a, int b) {
                             return pts_[static_cast<std::size_t>(a)][axis] <
                                    pts_[static_cast<std::size_t>(b)][axis];
                         });
        const double split = pts_[static_cast<std::size_t>(order_[static_cast<std::size_t>(mid)])][axis];
        const int l = build(first, mid, depth + 1);
        const int r = build(mid, last, depth + 1);
        Node& n = nodes_[static_cast<std::size_t>(node_idx)];
        n.axis = axis;
        n.split = split;
        n.left = l;
        n.right = r;
        return node_idx;
    }

    void search(int node_idx, const Vec3& q, Nearest& best) const {
        const Node& n = nodes_[static_cast<std::size_t>(node_idx)];
        if (n.count > 0) {
            for (int i = 0; i < n.count; ++i) {
                const int idx = order_[static_cast<std::size_t>(n.first + i)];
                const double d2 = (pts_[static_cast<std::size_t>(idx)] - q).squaredNorm();
                if (d2 < best.dist_sq || (d2 == best.dist_sq && idx < best.index)) {
                    best.dist_sq = d2;
                    best.index = idx;
                }
            }
            return;
        }
        const double delta = q[n.axis] - n.split;
        const int near = delta < 0.0 ? n.left : n.right;
        const int far = delta < 0.0 ? n.right : n.left;
        search(near, q, best);
        if (delta * delta <= best.dist_sq) search(far, q, best);
    }

    static constexpr int kLeafSize = 12;
    std::vector<Vec3> pts_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

}  // namespace sdfreg
