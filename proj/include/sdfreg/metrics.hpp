// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "sdfreg/errors.hpp"
#include "sdfreg/geometry.hpp"
#include "sdfreg/kdtree.hpp"

namespace sdfreg {

namespace detail {
/// Absolute angular difference folded into [0, 180] degrees.
inline double angle_diff_deg(double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}
}  // namespace detail

/// Mean absolute per-axis difference of the intrinsic Z-Y-X Euler angles of
/// the two rotations, degrees.
inline double mae_rotation_deg(const Mat3& r_est, const Mat3& r_gt) {
    const EulerZyx a = euler_zyx(r_est);
    const EulerZyx b = euler_zyx(r_gt);
    return (detail::angle_diff_deg(a.rx_deg, b.rx_deg) +
            detail::angle_diff_deg(a.ry_deg, b.ry_deg) +
            detail::angle_diff_deg(a.rz_deg, b.rz_deg)) /
           3.0;
}

inline double mae_translation_mm(const Vec3& t_est, const Vec3& t_gt) {
    return (t_est - t_gt).cwiseAbs().mean();
}

/// Mean distance from each point of `from` to its nearest neighbor in `to`.
inline double chamfer_one_sided(const PointCloud& from, const PointCloud& to) {
    if (from.empty() || to.empty()) throw EmptyCloud("chamfer: empty point cloud");
    const KdTree3 tree(to.points);
    double sum = 0.0;
    for (const Vec3& p : from.points) {
        const auto nn = tree.nearest(p);
        sum += (p - to.points[static_cast<std::size_t>(nn.index)]).norm();
    }
    return sum / static_cast<double>(from.size());
}

/// Symmetric Chamfer distance: the average of the two one-sided means.
inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    return 0.5 * (chamfer_one_sided(a, b) + chamfer_one_sided(b, a));
}

struct TreResult {
    std::vector<double> per_landmark_mm;
    double mean_mm = 0.0;
};

/// Target registration error: per held-out landmark, the distance between
/// the registered measured landmark and its model-frame counterpart.
inline TreResult tre(const RigidTransform& x_est, const PointCloud& targets_moved,
                     const PointCloud& targets_model) {
    if (targets_moved.size() != targets_model.size())
        throw CountMismatch("tre: landmark counts differ");
    if (targets_moved.empty()) throw EmptyCloud("tre: no landmarks");
    TreResult r;
    r.per_landmark_mm.reserve(targets_moved.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < targets_moved.size(); ++i) {
        const double e = (x_est * targets_moved.points[i] - targets_model.points[i]).norm();
        r.per_landmark_mm.push_back(e);
        sum += e;
    }
    r.mean_mm = sum / static_cast<double>(targets_moved.size());
    return r;
}

/// Quantitative evaluation of one registration run. chamfer_mm is the
/// one-sided mean NN distance from the registered inlier points to a dense
/// model sample cloud (the partial-to-full direction).
struct EvalReport {
    double mae_rot_deg = 0.0;
    double mae_trans_mm = 0.0;
    double chamfer_mm = 0.0;
    std::vector<double> tre_mm;
    double tre_mean_mm = 0.0;
    double runtime_s = 0.0;
};

}  // namespace sdfreg
