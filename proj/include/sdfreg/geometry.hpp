// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <cmath>
#include <vector>

#include "sdfreg/errors.hpp"

namespace sdfreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * (kPi / 180.0); }
inline double rad2deg(double rad) { return rad * (180.0 / kPi); }

/// Ordered 3D point list, millimeters. labels/weights are optional per-point
/// side channels; when non-empty they match points.size().
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<int> labels;
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

/// Cross-product matrix: skew(v) * w == v.cross(w).
inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

/// SO(3) exponential map (Rodrigues). Below ||xi|| = 1e-8 the sin/cos
/// coefficients switch to their second-order series to avoid dividing by a
/// vanishing angle.
inline Mat3 exp_so3(const Vec3& xi) {
    const double theta_sq = xi.squaredNorm();
    double a, b;  // R = I + a*S + b*S^2
    if (theta_sq < 1e-16) {
        a = 1.0 - theta_sq / 6.0;
        b = 0.5 - theta_sq / 24.0;
    } else {
        const double theta = std::sqrt(theta_sq);
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta_sq;
    }
    const Mat3 s = skew(xi);
    return Mat3::Identity() + a * s + b * (s * s);
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
    const double ortho = (r.transpose() * r - Mat3::Identity()).norm();
    return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

/// Update increment [xi, phi]: rotational part in radians, translational in mm.
struct Twist {
    Vec3 xi = Vec3::Zero();
    Vec3 phi = Vec3::Zero();
};

/// Rigid motion (R, t) in millimeters.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

    /// Composition; (a * b) applies b first, then a.
    RigidTransform operator*(const RigidTransform& o) const {
        return {rotation * o.rotation, rotation * o.translation + translation};
    }

    RigidTransform inverse() const {
        const Mat3 rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }
};

inline Vec3 transform_point(const RigidTransform& x, const Vec3& p) { return x * p; }

/// Pose update X (+) dX = (exp(xi^) * R, t + phi). Rotation and translation
/// increments are applied independently; this is not the SE(3) exponential.
inline RigidTransform compose_update(const RigidTransform& x, const Twist& dx) {
    return {exp_so3(dx.xi) * x.rotation, x.translation + dx.phi};
}

/// Intrinsic Z-Y-X Euler angles, degrees, each in (-180, 180].
struct EulerZyx {
    double rx_deg = 0.0;
    double ry_deg = 0.0;
    double rz_deg = 0.0;
};

/// R = Rz(rz) * Ry(ry) * Rx(rx), angles in degrees.
inline Mat3 rotation_from_euler_zyx(double rx_deg, double ry_deg, double rz_deg) {
    const double a = deg2rad(rx_deg), b = deg2rad(ry_deg), c = deg2rad(rz_deg);
    const double ca = std::cos(a), sa = std::sin(a);
    const double cb = std::cos(b), sb = std::sin(b);
    const double cc = std::cos(c), sc = std::sin(c);
    Mat3 r;
    r << cc * cb, cc * sb * sa - sc * ca, cc * sb * ca + sc * sa,
         sc * cb, sc * sb * sa + cc * ca, sc * sb * ca - cc * sa,
         -sb, cb * sa, cb * ca;
    return r;
}

namespace detail {
inline double canonical_deg(double rad) {
    double d = rad2deg(rad);
    if (d <= -180.0) d += 360.0;
    return d;
}
}  // namespace detail

/// Decompose R into intrinsic Z-Y-X angles. Within 1e-6 rad of the ry = +-90
/// degree gimbal lock, rx is fixed to 0 and the residual rotation folds into rz.
inline EulerZyx euler_zyx(const Mat3& r) {
    const double s = std::clamp(-r(2, 0), -1.0, 1.0);
    const double ry = std::asin(s);
    EulerZyx e;
    e.ry_deg = detail::canonical_deg(ry);
    if (kPi / 2.0 - std::abs(ry) < 1e-6) {
        e.rx_deg = 0.0;
        e.rz_deg = detail::canonical_deg(std::atan2(-r(0, 1), r(1, 1)));
    } else {
        e.rx_deg = detail::canonical_deg(std::atan2(r(2, 1), r(2, 2)));
        e.rz_deg = detail::canonical_deg(std::atan2(r(1, 0), r(0, 0)));
    }
    return e;
}

/// Least-squares rigid fit without scale: argmin_{R,t} sum ||R*src_i + t - dst_i||^2.
/// The SVD sign correction guarantees det(R) = +1. Throws
/// DegenerateConfiguration for mismatched/short inputs or collinear points.
inline RigidTransform umeyama_align(const std::vector<Vec3>& src,
                                    const std::vector<Vec3>& dst) {
    if (src.size() != dst.size())
        throw DegenerateConfiguration("umeyama_align: point counts differ");
    if (src.size() < 3)
        throw DegenerateConfiguration("umeyama_align: need at least 3 point pairs");

    const double n = static_cast<double>(src.size());
    Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        cs += src[i];
        cd += dst[i];
    }
    cs /= n;
    cd /= n;

    Mat3 cov = Mat3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i)
        cov += (dst[i] - cd) * (src[i] - cs).transpose();
    cov /= n;

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0))
        throw DegenerateConfiguration("umeyama_align: points are collinear or coincident");

    Mat3 d = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
    const Mat3 rot = svd.matrixU() * d * svd.matrixV().transpose();
    return {rot, cd - rot * cs};
}

}  // namespace sdfreg
