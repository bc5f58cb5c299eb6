// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "sdfreg/errors.hpp"
#include "sdfreg/geometry.hpp"
#include "sdfreg/sdf.hpp"

namespace sdfreg {

/// Knobs of the robust registration loop.
struct RobustConfig {
    double cauchy_c = 1.0;        // mm; Cauchy scale
    double weight_eps = 1e-3;     // IRLS stop: RMS per-point weight change
    double outlier_delta = 0.1;   // weights below this are discarded
    int max_irls_iters = 50;
    int max_gn_iters = 30;
    double gn_step_tol = 1e-8;    // on ||dX||
    double lm_lambda0 = 1e-6;     // initial Levenberg damping
    bool auto_scale_c = false;    // c = 1.4826 * median(|e|) per IRLS round
    int max_outer_rounds = 10;    // safety cap on discard rounds

    void validate() const {
        if (!(cauchy_c > 0.0)) throw InvalidArgument("RobustConfig: cauchy_c must be > 0");
        if (!(weight_eps > 0.0)) throw InvalidArgument("RobustConfig: weight_eps must be > 0");
        if (!(outlier_delta > 0.0 && outlier_delta < 1.0))
            throw InvalidArgument("RobustConfig: outlier_delta must be in (0, 1)");
        if (max_irls_iters < 1 || max_gn_iters < 1 || max_outer_rounds < 1)
            throw InvalidArgument("RobustConfig: iteration caps must be >= 1");
    }
};

/// Signed field value at the transformed point: SDF(R*p + t).
inline double residual(const GradientSdf& sdf, const RigidTransform& x, const Vec3& p) {
    return sdf.query(x * p).distance;
}

/// Row of the residual Jacobian w.r.t. the twist [xi | phi]:
/// g^T * [-(R*p)^ | I] with g the interpolated field gradient at R*p + t.
inline Vec6 jacobian_row(const GradientSdf& sdf, const RigidTransform& x, const Vec3& p) {
    const Vec3 rp = x.rotation * p;
    const SdfSample s = sdf.query(rp + x.translation);
    Vec6 row;
    row.head<3>() = rp.cross(s.gradient);  // (g^T * -(rp)^)^T
    row.tail<3>() = s.gradient;
    return row;
}

/// Cauchy M-estimator weight w(e) = 1 / (1 + (e/c)^2).
inline double cauchy_weight(double e, double c) {
    if (!(c > 0.0)) throw InvalidArgument("cauchy_weight: c must be > 0");
    const double u = e / c;
    return 1.0 / (1.0 + u * u);
}

namespace detail {

inline double weighted_cost(const GradientSdf& sdf, const RigidTransform& x,
                            std::span<const Vec3> points, std::span<const double> weights) {
    double cost = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double r = residual(sdf, x, points[i]);
        cost += weights[i] * r * r;
    }
    return cost;
}

}  // namespace detail

struct GaussNewtonResult {
    RigidTransform transform;
    std::vector<double> cost_history;  // weighted cost, non-increasing
    int iterations = 0;
};

/// Weighted Gauss-Newton on SE(3) with Levenberg damping. Each step solves
/// (J^T W J + lambda I) dX = -J^T W r and applies X <- X (+) dX; lambda grows
/// tenfold on a cost increase (step rejected) and shrinks tenfold on
/// acceptance, so the weighted cost never increases across accepted steps.
/// Throws RankDeficient when the normal matrix does not constrain all six
/// degrees of freedom (e.g. every point on one plane of a symmetric region).
inline GaussNewtonResult gauss_newton_solve(const GradientSdf& sdf, const RigidTransform& x0,
                                            std::span<const Vec3> points,
                                            std::span<const double> weights,
                                            const RobustConfig& cfg = {}) {
    if (points.size() != weights.size())
        throw CountMismatch("gauss_newton_solve: points/weights size mismatch");
    std::size_t active = 0;
    for (double w : weights)
        if (w > 0.0) ++active;
    if (active < 6) throw TooFewInliers("gauss_newton_solve: need >= 6 points with weight > 0");

    GaussNewtonResult result;
    RigidTransform x = x0;
    double lambda = cfg.lm_lambda0;
    double cost = detail::weighted_cost(sdf, x, points, weights);
    result.cost_history.push_back(cost);

    for (int iter = 0; iter < cfg.max_gn_iters; ++iter) {
        // The normal system is assembled with the rotation recentered about
        // the weighted centroid of the rotated points. The raw twist rotates
        // about the world origin, and with |p| beyond 1000 mm that lever arm
        // makes J^T W J numerically singular; recentering is an invertible
        // change of variables, so the update mapped back below is the same
        // left-multiplied increment.
        Vec3 pivot = Vec3::Zero();
        double w_total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            pivot += weights[i] * (x.rotation * points[i]);
            w_total += weights[i];
        }
        pivot /= w_total;

        Mat6 h = Mat6::Zero();
        Vec6 b = Vec6::Zero();
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double w = weights[i];
            if (w == 0.0) continue;
            const Vec3 rp = x.rotation * points[i];
            const SdfSample s = sdf.query(rp + x.translation);
            Vec6 row;
            row.head<3>() = (rp - pivot).cross(s.gradient);
            row.tail<3>() = s.gradient;
            h.noalias() += w * (row * row.transpose());
            b.noalias() += (w * s.distance) * row;
        }

        Eigen::SelfAdjointEigenSolver<Mat6> eig(h);
        const double ev_min = eig.eigenvalues()(0);
        const double ev_max = eig.eigenvalues()(5);
        if (!(ev_max > 0.0) || ev_min <= 1e-12 * ev_max)
            throw RankDeficient("gauss_newton_solve: normal matrix numerically singular");

        bool accepted = false;
        double step_norm = 0.0;
        for (int attempt = 0; attempt < 16; ++attempt) {
            const Mat6 a = h + lambda * Mat6::Identity();
            const Vec6 dc = a.ldlt().solve(-b);
            if (!dc.allFinite()) {
                lambda = std::max(lambda * 10.0, 1e-12);
                continue;
            }
            Vec6 dx;
            dx.head<3>() = dc.head<3>();
            dx.tail<3>() = dc.tail<3>() - dc.head<3>().cross(pivot);
            const RigidTransform x_try =
                compose_update(x, Twist{dx.head<3>(), dx.tail<3>()});
            const double cost_try = detail::weighted_cost(sdf, x_try, points, weights);
            if (cost_try <= cost) {
                x = x_try;
                cost = cost_try;
                result.cost_history.push_back(cost);
                lambda = std::max(lambda * 0.1, 1e-15);
                step_norm = dc.norm();  // recentered norm: scale-honest for far-origin clouds
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        result.iterations = iter + 1;
        if (!accepted) break;  // no descent direction left at this damping range
        if (step_norm < cfg.gn_step_tol) break;
    }

    result.transform = x;
    return result;
}

struct IrlsResult {
    RigidTransform transform;
    std::vector<double> weights;       // Cauchy weights of the final round
    int rounds = 0;
    std::vector<double> cost_history;  // concatenated per-round GN histories
};

/// Seam for swapping the M-estimator: maps (residual magnitude, scale) to a
/// weight in (0, 1]. The default is cauchy_weight.
using WeightFunction = double (*)(double e, double c);

/// Cauchy IRLS: each round evaluates residual magnitudes at the current
/// estimate, recomputes the weights, and re-solves the weighted problem warm
/// started from that estimate. Stops when the RMS weight change falls to
/// weight_eps or the round cap is hit.
inline IrlsResult irls_register(const GradientSdf& sdf, std::span<const Vec3> points,
                                const RigidTransform& x0, const RobustConfig& cfg = {},
                                WeightFunction weight = &cauchy_weight) {
    cfg.validate();
    if (points.size() < 6) throw TooFewInliers("irls_register: need >= 6 points");

    IrlsResult result;
    RigidTransform x = x0;
    const std::size_t n = points.size();
    std::vector<double> w_prev(n, 1.0);
    std::vector<double> w(n), e(n);

    for (int round = 1; round <= cfg.max_irls_iters; ++round) {
        for (std::size_t i = 0; i < n; ++i) e[i] = std::abs(residual(sdf, x, points[i]));

        double c = cfg.cauchy_c;
        if (cfg.auto_scale_c) {
            std::vector<double> tmp = e;
            std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
            c = std::max(1.4826 * tmp[tmp.size() / 2], 1e-6);
        }
        for (std::size_t i = 0; i < n; ++i) w[i] = weight(e[i], c);

        const GaussNewtonResult gn = gauss_newton_solve(sdf, x, points, w, cfg);
        x = gn.transform;
        result.cost_history.insert(result.cost_history.end(), gn.cost_history.begin(),
                                   gn.cost_history.end());
        result.rounds = round;

        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) sq += (w[i] - w_prev[i]) * (w[i] - w_prev[i]);
        if (std::sqrt(sq / static_cast<double>(n)) <= cfg.weight_eps) break;
        w_prev = w;
    }

    result.transform = x;
    result.weights = std::move(w);
    return result;
}

struct RegistrationResult {
    RigidTransform transform;
    std::vector<double> weights;     // last computed weight per input point
    std::vector<bool> inlier_mask;   // false for discarded points
    std::vector<std::vector<int>> discarded_rounds;  // original indices per round
    std::vector<double> cost_history;
    int irls_rounds = 0;
    double elapsed_seconds = 0.0;
};

/// Full robust loop: IRLS to weight convergence, discard every point whose
/// converged weight fell below outlier_delta, then re-enter on the survivors
/// warm started from the current estimate (weights reset to one). Terminates
/// when no weight is below the threshold, erroring out if fewer than six
/// points survive; a round cap bounds the outer loop.
inline RegistrationResult robust_register(const GradientSdf& sdf, std::span<const Vec3> points,
                                          const RigidTransform& x0, const RobustConfig& cfg = {},
                                          WeightFunction weight = &cauchy_weight) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const std::size_t n = points.size();
    if (n < 6) throw TooFewInliers("robust_register: need >= 6 points");

    RegistrationResult result;
    result.weights.assign(n, 1.0);
    result.inlier_mask.assign(n, true);

    std::vector<int> active(n);
    std::iota(active.begin(), active.end(), 0);
    std::vector<Vec3> active_pts(points.begin(), points.end());
    RigidTransform x = x0;

    for (int outer = 0; outer < cfg.max_outer_rounds; ++outer) {
        const IrlsResult ir = irls_register(sdf, active_pts, x, cfg, weight);
        x = ir.transform;
        result.irls_rounds += ir.rounds;
        result.cost_history.insert(result.cost_history.end(), ir.cost_history.begin(),
                                   ir.cost_history.end());
        for (std::size_t i = 0; i < active.size(); ++i)
            result.weights[static_cast<std::size_t>(active[i])] = ir.weights[i];

        std::vector<int> discard;
        for (std::size_t i = 0; i < active.size(); ++i)
            if (ir.weights[i] < cfg.outlier_delta) discard.push_back(active[i]);
        if (discard.empty()) break;

        result.discarded_rounds.push_back(discard);
        for (int idx : discard) result.inlier_mask[static_cast<std::size_t>(idx)] = false;

        std::vector<int> survivors;
        std::vector<Vec3> survivor_pts;
        survivors.reserve(active.size() - discard.size());
        survivor_pts.reserve(active.size() - discard.size());
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (ir.weights[i] >= cfg.outlier_delta) {
                survivors.push_back(active[i]);
                survivor_pts.push_back(active_pts[i]);
            }
        }
        if (survivors.size() < 6)
            throw TooFewInliers("robust_register: fewer than 6 points survive outlier removal");
        active = std::move(survivors);
        active_pts = std::move(survivor_pts);
    }

    result.transform = x;
    result.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

}  // namespace sdfreg
