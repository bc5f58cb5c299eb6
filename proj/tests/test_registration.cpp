// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace sdfreg;
using namespace testutil;

namespace {

/// Clean on-surface samples from the upper region of the box (+z face
/// interior plus neighborhood), away from edges.
std::vector<Vec3> box_face_points(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        pts.emplace_back(rng.uniform(-35, 35), rng.uniform(-35, 35), 50.0);
    return pts;
}

/// Points on several box faces so all six pose DOFs are constrained.
std::vector<Vec3> box_corner_points(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform(-35, 35), v = rng.uniform(-35, 35);
        switch (i % 3) {
            case 0: pts.emplace_back(u, v, 50.0); break;
            case 1: pts.emplace_back(50.0, u, v); break;
            default: pts.emplace_back(u, 50.0, v); break;
        }
    }
    return pts;
}

RigidTransform small_pose(double angle_deg, double trans_mm, std::uint64_t seed) {
    Rng rng(seed);
    Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
    axis.normalize();
    Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
    dir.normalize();
    RigidTransform t;
    t.rotation = exp_so3(axis * deg2rad(angle_deg));
    t.translation = dir * trans_mm;
    return t;
}

}  // namespace

TEST(CauchyWeight, TableValues) {
    EXPECT_EQ(cauchy_weight(0.0, 1.0), 1.0);
    EXPECT_EQ(cauchy_weight(1.0, 1.0), 0.5);
    EXPECT_EQ(cauchy_weight(3.0, 1.0), 0.1);
    EXPECT_THROW(cauchy_weight(1.0, 0.0), InvalidArgument);
    EXPECT_THROW(cauchy_weight(1.0, -2.0), InvalidArgument);
}

TEST(CauchyWeight, Properties) {
    Rng rng(3);
    double prev = 1.0;
    for (double e = 0.0; e <= 30.0; e += 0.25) {
        const double w = cauchy_weight(e, 1.0);
        EXPECT_GT(w, 0.0);
        EXPECT_LE(w, 1.0);
        if (e > 0.0) {
            EXPECT_LT(w, 1.0);
            EXPECT_LT(w, prev);  // strictly decreasing in |e|
        }
        EXPECT_EQ(w, cauchy_weight(-e, 1.0));  // even
        prev = w;
    }
    // scaled form
    for (int i = 0; i < 50; ++i) {
        const double e = rng.uniform(0.0, 10.0), c = rng.uniform(0.1, 5.0);
        EXPECT_NEAR(cauchy_weight(e, c), 1.0 / (1.0 + (e / c) * (e / c)), 1e-15);
    }
}

TEST(Residual, OnSurfaceIsNearZero) {
    const GradientSdf& sdf = box_grid();
    for (const Vec3& p : box_face_points(100, 5))
        EXPECT_LE(std::abs(residual(sdf, RigidTransform{}, p)), 0.5 * sdf.voxel_size);
}

TEST(Residual, PlaneOffsetAndProjection) {
    const GradientSdf& sdf = box_grid();
    const Vec3 p(10.0, -7.0, 55.0);  // 5 mm above the +z face
    EXPECT_NEAR(residual(sdf, RigidTransform{}, p), 5.0, 0.05);
    RigidTransform project;
    project.translation = Vec3(0, 0, -5.0);
    EXPECT_NEAR(residual(sdf, project, p), 0.0, 0.05);
}

TEST(JacobianRow, TranslationBlockIsQueriedGradient) {
    const GradientSdf& sdf = sphere_grid();
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        RigidTransform x = small_pose(rng.uniform(0, 30), rng.uniform(0, 20), 100 + i);
        const Vec3 p(rng.uniform(-45, 45), rng.uniform(-45, 45), rng.uniform(-45, 45));
        const Vec6 row = jacobian_row(sdf, x, p);
        const Vec3 g = sdf.query(x * p).gradient;
        EXPECT_EQ((row.tail<3>() - g).norm(), 0.0);
    }
}

TEST(JacobianRow, RotationBlockVanishesAtOrigin) {
    const GradientSdf& sdf = sphere_grid();
    const Vec6 row = jacobian_row(sdf, RigidTransform{}, Vec3::Zero());
    EXPECT_EQ(row.head<3>().norm(), 0.0);
}

TEST(JacobianRow, MatchesCentralFiniteDifferences) {
    // planar box regions: the interpolated field is exactly linear there, so
    // the finite-difference oracle and the stored-gradient chain rule agree
    const GradientSdf& sdf = box_grid();
    Rng rng(13);
    const double h = 1e-4;
    int checked = 0;
    while (checked < 200) {
        // target point in a cell near the +z face interior, inside or outside
        const Vec3 q(rng.uniform(-30, 30), rng.uniform(-30, 30), 50.0 + rng.uniform(-4.0, 4.0));
        const RigidTransform x = small_pose(rng.uniform(0.0, 180.0), rng.uniform(0.0, 15.0),
                                            1000 + static_cast<std::uint64_t>(checked));
        const Vec3 p = x.inverse() * q;

        const Vec6 analytic = jacobian_row(sdf, x, p);
        Vec6 fd;
        for (int a = 0; a < 6; ++a) {
            Twist plus, minus;
            if (a < 3) {
                plus.xi[a] = h;
                minus.xi[a] = -h;
            } else {
                plus.phi[a - 3] = h;
                minus.phi[a - 3] = -h;
            }
            fd[a] = (residual(sdf, compose_update(x, plus), p) -
                     residual(sdf, compose_update(x, minus), p)) /
                    (2.0 * h);
        }
        ASSERT_LE((analytic - fd).norm(), 1e-3 * fd.norm())
            << "analytic " << analytic.transpose() << " fd " << fd.transpose();
        ++checked;
    }
}

TEST(GaussNewton, FixedPointAtZeroResidual) {
    const GradientSdf& sdf = box_grid();
    const auto pts = box_corner_points(60, 21);
    const std::vector<double> w(pts.size(), 1.0);
    const GaussNewtonResult r = gauss_newton_solve(sdf, RigidTransform{}, pts, w);
    EXPECT_LT(rotation_angle_deg(r.transform.rotation, Mat3::Identity()), 1e-8);
    EXPECT_LT(r.transform.translation.norm(), 1e-8);
}

TEST(GaussNewton, RecoversSmallPoseOnIcospherePatch) {
    // a coarse icosphere: its faceting is what makes rotation about the
    // sphere center observable at all in the interpolated field
    static const TriangleMesh coarse = make_icosphere(40.0, 2);
    static const GradientSdf sdf = build_gradient_sdf(coarse, 1.0, 10.0);
    const RegionMask mask = spherical_cap_mask(coarse, top_vertex(coarse), 32.0);
    const PointCloud surface = sample_probe_strokes(coarse, mask, 20, 25, 1.5, 333);
    ASSERT_EQ(surface.size(), 500u);

    const RigidTransform gt = small_pose(5.0, 5.0, 99);
    const RigidTransform inv = gt.inverse();
    std::vector<Vec3> moved;
    for (const Vec3& p : surface.points) moved.push_back(inv * p);

    std::vector<double> w(moved.size(), 1.0);
    RobustConfig cfg;
    cfg.max_gn_iters = 50;
    const GaussNewtonResult r = gauss_newton_solve(sdf, RigidTransform{}, moved, w, cfg);
    EXPECT_LE(mae_rotation_deg(r.transform.rotation, gt.rotation), 0.1);
    EXPECT_LE(mae_translation_mm(r.transform.translation, gt.translation), 0.1);
}

TEST(GaussNewton, WeightedCostNonIncreasing) {
    const GradientSdf& sdf = sphere_grid();
    const RegionMask mask = spherical_cap_mask(sphere_mesh(), top_vertex(sphere_mesh()), 25.0);
    PointCloud surface = sample_probe_strokes(sphere_mesh(), mask, 10, 20, 1.5, 7);
    surface = add_gaussian_noise(surface, Vec3(0.5, 0.5, 0.5), 8);
    const RigidTransform inv = small_pose(4.0, 6.0, 55).inverse();
    std::vector<Vec3> moved;
    for (const Vec3& p : surface.points) moved.push_back(inv * p);
    std::vector<double> w(moved.size());
    Rng rng(9);
    for (auto& wi : w) wi = rng.uniform(0.2, 1.0);

    const GaussNewtonResult r = gauss_newton_solve(sdf, RigidTransform{}, moved, w);
    ASSERT_GE(r.cost_history.size(), 2u);
    for (std::size_t i = 1; i < r.cost_history.size(); ++i)
        ASSERT_LE(r.cost_history[i], r.cost_history[i - 1]);
}

TEST(GaussNewton, ZeroWeightPointsHaveNoEffect) {
    const GradientSdf& sdf = sphere_grid();
    const RegionMask mask = spherical_cap_mask(sphere_mesh(), top_vertex(sphere_mesh()), 25.0);
    const PointCloud surface = sample_probe_strokes(sphere_mesh(), mask, 10, 20, 1.5, 71);
    const RigidTransform inv = small_pose(3.0, 4.0, 72).inverse();
    std::vector<Vec3> moved;
    for (const Vec3& p : surface.points) moved.push_back(inv * p);

    // with appended garbage points at weight zero
    std::vector<Vec3> with_junk = moved;
    Rng rng(73);
    for (int i = 0; i < 60; ++i)
        with_junk.emplace_back(rng.uniform(-200, 200), rng.uniform(-200, 200),
                               rng.uniform(-200, 200));
    std::vector<double> w_plain(moved.size(), 1.0);
    std::vector<double> w_junk(with_junk.size(), 1.0);
    for (std::size_t i = moved.size(); i < with_junk.size(); ++i) w_junk[i] = 0.0;

    const GaussNewtonResult a = gauss_newton_solve(sdf, RigidTransform{}, moved, w_plain);
    const GaussNewtonResult b = gauss_newton_solve(sdf, RigidTransform{}, with_junk, w_junk);
    EXPECT_LE((a.transform.rotation - b.transform.rotation).norm(), 1e-9);
    EXPECT_LE((a.transform.translation - b.transform.translation).norm(), 1e-9);
}

TEST(GaussNewton, RankDeficientOnDegenerateGeometry) {
    const GradientSdf& sdf = box_grid();
    // all points on one plane of a symmetric region: translations within the
    // plane and the in-plane rotation are unobservable
    const auto plane = box_face_points(80, 31);
    const std::vector<double> w(plane.size(), 1.0);
    EXPECT_THROW(gauss_newton_solve(sdf, RigidTransform{}, plane, w), RankDeficient);

    const std::vector<Vec3> same(20, Vec3(10.0, 5.0, 50.0));
    const std::vector<double> w2(same.size(), 1.0);
    EXPECT_THROW(gauss_newton_solve(sdf, RigidTransform{}, same, w2), RankDeficient);
}

TEST(GaussNewton, TooFewPoints) {
    const GradientSdf& sdf = box_grid();
    const auto pts = box_corner_points(5, 41);
    const std::vector<double> w(pts.size(), 1.0);
    EXPECT_THROW(gauss_newton_solve(sdf, RigidTransform{}, pts, w), TooFewInliers);

    // six points but only five carry weight
    const auto pts6 = box_corner_points(6, 42);
    std::vector<double> w6(6, 1.0);
    w6[3] = 0.0;
    EXPECT_THROW(gauss_newton_solve(sdf, RigidTransform{}, pts6, w6), TooFewInliers);
}

TEST(Irls, CleanDataConvergesFastWithHighWeights) {
    const GradientSdf& sdf = bone_grid();
    const PointCloud surface = sample_probe_strokes(bone_mesh(), bone_cap(), 20, 25, 2.0, 11);
    const RigidTransform gt = small_pose(3.0, 3.0, 12);
    const RigidTransform inv = gt.inverse();
    std::vector<Vec3> moved;
    for (const Vec3& p : surface.points) moved.push_back(inv * p);

    const IrlsResult r = irls_register(sdf, moved, RigidTransform{});
    EXPECT_LE(r.rounds, 3);
    for (double w : r.weights) EXPECT_GE(w, 0.9);
    EXPECT_LE(mae_rotation_deg(r.transform.rotation, gt.rotation), 0.2);
}

TEST(Irls, SeparatesFarOutliers) {
    const GradientSdf& sdf = bone_grid();
    const PointCloud surface = sample_probe_strokes(bone_mesh(), bone_cap(), 14, 25, 2.0, 13);
    std::vector<Vec3> pts(surface.points.begin(), surface.points.end());
    const std::size_t n_in = pts.size();
    // 30% outliers, all at least 5 mm from the surface
    Rng rng(14);
    const Aabb box = bone_mesh().bounds().scaled(1.4);
    std::size_t added = 0;
    while (added < n_in * 3 / 7) {
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = rng.uniform(box.min[a], box.max[a]);
        if (std::abs(sdf.query(p).distance) < 5.0) continue;
        pts.push_back(p);
        ++added;
    }

    const IrlsResult r = irls_register(sdf, pts, RigidTransform{});
    for (std::size_t i = 0; i < n_in; ++i) EXPECT_GT(r.weights[i], 0.5) << "inlier " << i;
    for (std::size_t i = n_in; i < pts.size(); ++i) EXPECT_LT(r.weights[i], 0.1) << "outlier " << i;
}

TEST(Irls, DegenerateEpsilonRunsExactlyOneRound) {
    const GradientSdf& sdf = bone_grid();
    const PointCloud surface = sample_probe_strokes(bone_mesh(), bone_cap(), 8, 20, 2.0, 15);
    RobustConfig cfg;
    cfg.weight_eps = 1.0;
    const IrlsResult r = irls_register(sdf, surface.points, RigidTransform{}, cfg);
    EXPECT_EQ(r.rounds, 1);
}

TEST(Irls, WeightFunctionSeam) {
    // an alternative weight plugged through the seam sees unit weights on
    // clean data, so it must land on the same estimate as the Cauchy route
    const GradientSdf& sdf = bone_grid();
    const PointCloud surface = sample_probe_strokes(bone_mesh(), bone_cap(), 8, 20, 2.0, 16);
    const auto huber = +[](double e, double c) { return e <= c ? 1.0 : c / e; };
    const IrlsResult a = irls_register(sdf, surface.points, RigidTransform{}, {}, huber);
    const IrlsResult b = irls_register(sdf, surface.points, RigidTransform{});
    for (double w : a.weights) EXPECT_GE(w, 0.9);
    EXPECT_LE(rotation_angle_deg(a.transform.rotation, b.transform.rotation), 0.05);
    EXPECT_LE((a.transform.translation - b.transform.translation).norm(), 0.05);
}

TEST(RobustRegister, NoOutliersMeansSingleOuterRound) {
    const GradientSdf& sdf = bone_grid();
    const PointCloud surface = sample_probe_strokes(bone_mesh(), bone_cap(), 15, 25, 2.0, 17);
    const RigidTransform gt = small_pose(4.0, 8.0, 18);
    const RigidTransform inv = gt.inverse();
    std::vector<Vec3> moved;
    for (const Vec3& p : surface.points) moved.push_back(inv * p);

    const RegistrationResult r = robust_register(sdf, moved, RigidTransform{});
    EXPECT_TRUE(r.discarded_rounds.empty());
    for (bool m : r.inlier_mask) EXPECT_TRUE(m);
    EXPECT_LE(mae_rotation_deg(r.transform.rotation, gt.rotation), 0.3);
    EXPECT_LE(mae_translation_mm(r.transform.translation, gt.translation), 0.3);
}

TEST(RobustRegister, FixedPointAtGroundTruth) {
    const GradientSdf& sdf = box_grid();
    const auto pts = box_corner_points(120, 19);
    const RegistrationResult r = robust_register(sdf, pts, RigidTransform{});
    EXPECT_LE(rotation_angle_deg(r.transform.rotation, Mat3::Identity()), rad2deg(1e-6));
    EXPECT_LE(r.transform.translation.norm(), 1e-3);
}

TEST(RobustRegister, DiscardsInjectedOutliersAndKeepsInliers) {
    // a 50%-outlier operating point: >= 95% of injected outliers
    // discarded, <= 5% of inliers lost, MAE within 1 deg / 1 mm
    const GradientSdf& sdf = bone_grid();
    static const RegionMask exposure =
        spherical_cap_mask(bone_mesh(), top_vertex(bone_mesh()), 55.0);
    ExperimentSpec spec;
    spec.seed = 20;
    spec.n_strokes = 25;
    spec.points_per_stroke = 40;
    spec.stroke_spacing_mm = 1.8;
    spec.noise_sigma_mm = Vec3(0.5, 0.5, 0.5);
    spec.outlier_ratio = 0.5;
    spec.aabb_inflation = 1.0;
    spec.rot_range_deg = 30.0;
    spec.trans_range_mm = 200.0;
    const SyntheticTrial trial = make_trial(bone_mesh(), exposure, spec);

    const RigidTransform init = umeyama_align(
        {trial.landmarks_moved.points.begin(), trial.landmarks_moved.points.begin() + 3},
        {trial.landmarks_model.points.begin(), trial.landmarks_model.points.begin() + 3});
    const RegistrationResult r = robust_register(sdf, trial.combined.points, init);

    const RigidTransform est_inv = r.transform.inverse();
    const RigidTransform gt_inv = trial.gt_transform.inverse();
    EXPECT_LE(mae_rotation_deg(est_inv.rotation, gt_inv.rotation), 1.0);
    EXPECT_LE(mae_translation_mm(est_inv.translation, gt_inv.translation), 1.0);

    std::size_t out_total = 0, out_discarded = 0, in_total = 0, in_kept = 0;
    for (std::size_t i = 0; i < trial.combined.size(); ++i) {
        if (trial.combined.labels[i] == 0) {
            ++out_total;
            if (!r.inlier_mask[i]) ++out_discarded;
        } else {
            ++in_total;
            if (r.inlier_mask[i]) ++in_kept;
        }
    }
    EXPECT_GE(static_cast<double>(out_discarded), 0.95 * static_cast<double>(out_total));
    EXPECT_GE(static_cast<double>(in_kept), 0.95 * static_cast<double>(in_total));
    // every discarded point had weight below the threshold when dropped
    for (const auto& round : r.discarded_rounds)
        for (int idx : round) EXPECT_LT(r.weights[static_cast<std::size_t>(idx)], 0.1);
}

TEST(RobustRegister, DeterministicAcrossRuns) {
    const GradientSdf& sdf = bone_grid();
    ExperimentSpec spec;
    spec.seed = 77;
    spec.n_strokes = 10;
    spec.points_per_stroke = 20;
    spec.noise_sigma_mm = Vec3(0.3, 0.5, 0.7);
    spec.outlier_ratio = 0.5;
    spec.rot_range_deg = 20.0;
    spec.trans_range_mm = 100.0;
    const SyntheticTrial t1 = make_trial(bone_mesh(), bone_cap(), spec);
    const SyntheticTrial t2 = make_trial(bone_mesh(), bone_cap(), spec);
    ASSERT_EQ(t1.combined.size(), t2.combined.size());

    const RigidTransform init = umeyama_align(
        {t1.landmarks_moved.points.begin(), t1.landmarks_moved.points.begin() + 3},
        {t1.landmarks_model.points.begin(), t1.landmarks_model.points.begin() + 3});
    const RegistrationResult a = robust_register(sdf, t1.combined.points, init);
    const RegistrationResult b = robust_register(sdf, t2.combined.points, init);
    EXPECT_EQ((a.transform.rotation - b.transform.rotation).norm(), 0.0);
    EXPECT_EQ((a.transform.translation - b.transform.translation).norm(), 0.0);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.inlier_mask, b.inlier_mask);
    EXPECT_EQ(a.cost_history, b.cost_history);
    EXPECT_EQ(a.irls_rounds, b.irls_rounds);
}

TEST(RobustRegister, TooFewPoints) {
    const GradientSdf& sdf = box_grid();
    const std::vector<Vec3> five(5, Vec3(0, 0, 50));
    EXPECT_THROW(robust_register(sdf, five, RigidTransform{}), TooFewInliers);
}

TEST(RobustConfig, Validation) {
    RobustConfig bad;
    bad.cauchy_c = 0.0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = RobustConfig{};
    bad.outlier_delta = 1.0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = RobustConfig{};
    bad.max_irls_iters = 0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
}
