// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"

using namespace sdfreg;
using namespace testutil;

TEST(ClosestPointTriangle, RegionClassification) {
    const Vec3 a(0, 0, 0), b(10, 0, 0), c(0, 10, 0);
    auto r = closest_point_triangle(Vec3(-1, -1, 0), a, b, c);
    EXPECT_EQ(r.feature, TriFeature::V0);
    EXPECT_LT((r.point - a).norm(), 1e-15);

    r = closest_point_triangle(Vec3(5, -2, 0), a, b, c);
    EXPECT_EQ(r.feature, TriFeature::E01);
    EXPECT_LT((r.point - Vec3(5, 0, 0)).norm(), 1e-12);

    r = closest_point_triangle(Vec3(2, 3, 7), a, b, c);
    EXPECT_EQ(r.feature, TriFeature::Face);
    EXPECT_LT((r.point - Vec3(2, 3, 0)).norm(), 1e-12);
    EXPECT_NEAR(r.dist_sq, 49.0, 1e-10);

    r = closest_point_triangle(Vec3(8, 8, -3), a, b, c);
    EXPECT_EQ(r.feature, TriFeature::E12);
}

TEST(Shapes, WatertightAndOriented) {
    EXPECT_TRUE(box_mesh().is_watertight());
    EXPECT_TRUE(make_icosphere(10.0, 1).is_watertight());
    EXPECT_TRUE(bone_mesh().is_watertight());

    // outward orientation: face normal agrees with centroid direction on a sphere
    const TriangleMesh sphere = make_icosphere(10.0, 2);
    for (std::size_t f = 0; f < sphere.faces.size(); ++f) {
        const auto& t = sphere.faces[f];
        const Vec3 c = (sphere.vertices[t[0]] + sphere.vertices[t[1]] + sphere.vertices[t[2]]) / 3.0;
        EXPECT_GT(sphere.face_normals[f].dot(c.normalized()), 0.5);
    }
}

TEST(MeshBvh, EqualsBruteForceScan) {
    const TriangleMesh mesh = make_icosphere(25.0, 2);  // 320 faces
    ASSERT_LE(mesh.faces.size(), 500u);
    const MeshBvh bvh(mesh);
    Rng rng(71);
    int hint = -1;
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p(rng.uniform(-35, 35), rng.uniform(-35, 35), rng.uniform(-35, 35));
        const auto fast = bvh.closest(p, hint);
        hint = fast.tri;
        const auto slow = brute_closest(mesh, p);
        ASSERT_EQ(fast.tri, slow.tri);
        ASSERT_EQ(fast.dist_sq, slow.dist_sq);
        ASSERT_EQ((fast.point - slow.point).norm(), 0.0);
    }
}

TEST(BuildGradientSdf, AcceleratedBuildEqualsBruteForce) {
    const TriangleMesh mesh = make_icosphere(25.0, 2);  // 320 faces
    const GradientSdf fast = build_gradient_sdf(mesh, 2.0, 5.0);
    ASSERT_LE(fast.dims[0], 32);
    ASSERT_LE(fast.dims[1], 32);
    ASSERT_LE(fast.dims[2], 32);
    const GradientSdf slow = brute_build(mesh, 2.0, 5.0);
    ASSERT_EQ(fast.dims, slow.dims);
    ASSERT_EQ(fast.distance.size(), slow.distance.size());
    for (std::size_t i = 0; i < fast.distance.size(); ++i) {
        ASSERT_EQ(fast.distance[i], slow.distance[i]) << "voxel " << i;
        ASSERT_EQ(fast.gradient[3 * i], slow.gradient[3 * i]);
        ASSERT_EQ(fast.gradient[3 * i + 1], slow.gradient[3 * i + 1]);
        ASSERT_EQ(fast.gradient[3 * i + 2], slow.gradient[3 * i + 2]);
    }
}

TEST(BuildGradientSdf, SphereCenterVoxel) {
    const TriangleMesh mesh = make_icosphere(50.0, 3);
    const double voxel = 2.0;
    const GradientSdf sdf = build_gradient_sdf(mesh, voxel, 6.0);
    // stored voxel nearest to the origin
    int bi = 0, bj = 0, bk = 0;
    double best = 1e300;
    for (int a = 0; a < 3; ++a) EXPECT_GE(sdf.dims[a], 50);
    for (int k = 0; k < sdf.dims[2]; ++k)
        for (int j = 0; j < sdf.dims[1]; ++j)
            for (int i = 0; i < sdf.dims[0]; ++i) {
                const double d = sdf.voxel_center(i, j, k).norm();
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                    bk = k;
                }
            }
    const double stored = sdf.distance[sdf.index(bi, bj, bk)];
    // faceting of a subdiv-3 icosphere at r=50 stays below 0.2 mm
    EXPECT_NEAR(stored, -50.0, voxel + 0.2);
}

TEST(BuildGradientSdf, BoxCenterAndVertexVoxels) {
    const GradientSdf& sdf = box_grid();
    // origin (-60,-60,-60), voxel 1: box center and corners land on voxel centers
    const std::size_t center = sdf.index(60, 60, 60);
    EXPECT_NEAR(sdf.distance[center], -50.0, 1e-6);
    const std::size_t corner = sdf.index(10, 10, 10);  // vertex (-50,-50,-50)
    EXPECT_EQ(sdf.distance[corner], 0.0f);
}

TEST(BuildGradientSdf, StoredInvariants) {
    const GradientSdf& sdf = sphere_grid();
    const double diag = sdf.grid_diagonal();
    for (std::size_t i = 0; i < sdf.voxel_count(); ++i) {
        const Vec3 g = sdf.stored_gradient(i);
        ASSERT_NEAR(g.norm(), 1.0, 1e-6);
        ASSERT_LE(std::abs(static_cast<double>(sdf.distance[i])), diag);
    }
}

TEST(BuildGradientSdf, SignsMatchAnalyticSphere) {
    const GradientSdf& sdf = sphere_grid();
    Rng rng(83);
    for (int i = 0; i < 3000; ++i) {
        Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
        dir.normalize();
        const Vec3 p = dir * rng.uniform(0.0, 48.0);
        const double analytic = sphere_sdf(p, 40.0);
        if (std::abs(analytic) < 0.5) continue;  // skip the faceting band
        EXPECT_EQ(sdf.query(p).distance < 0.0, analytic < 0.0) << "at " << p.transpose();
    }
}

TEST(BuildGradientSdf, ErrorsAndWatertightFlag) {
    TriangleMesh empty;
    EXPECT_THROW(build_gradient_sdf(empty, 1.0, 1.0), EmptyMesh);
    EXPECT_THROW(build_gradient_sdf(box_mesh(), 0.0, 1.0), InvalidArgument);
    EXPECT_THROW(build_gradient_sdf(box_mesh(), 1.0, -1.0), InvalidArgument);

    TriangleMesh open_box = make_box(40, 40, 40);
    open_box.faces.pop_back();
    open_box.update_face_normals();
    const GradientSdf sdf = build_gradient_sdf(open_box, 4.0, 4.0);
    EXPECT_FALSE(sdf.watertight);
    EXPECT_TRUE(box_grid().watertight);
}

TEST(Query, VoxelCenterIsBitExact) {
    const GradientSdf& sdf = box_grid();
    for (const auto [i, j, k] : {std::array<int, 3>{17, 30, 61}, {60, 60, 60}, {0, 0, 0},
                                 {sdf.dims[0] - 1, 4, 9}}) {
        const SdfSample s = sdf.query(sdf.voxel_center(i, j, k));
        const std::size_t idx = sdf.index(i, j, k);
        ASSERT_EQ(s.distance, static_cast<double>(sdf.distance[idx]));
        ASSERT_EQ(s.gradient.x(), static_cast<double>(sdf.gradient[3 * idx]));
        ASSERT_EQ(s.gradient.y(), static_cast<double>(sdf.gradient[3 * idx + 1]));
        ASSERT_EQ(s.gradient.z(), static_cast<double>(sdf.gradient[3 * idx + 2]));
        ASSERT_TRUE(s.inside_grid);
    }
}

TEST(Query, MidpointIsArithmeticMean) {
    const GradientSdf& sdf = box_grid();
    const Vec3 a = sdf.voxel_center(20, 35, 50);
    const Vec3 b = sdf.voxel_center(21, 35, 50);
    const double expected =
        0.5 * (static_cast<double>(sdf.distance[sdf.index(20, 35, 50)]) +
               static_cast<double>(sdf.distance[sdf.index(21, 35, 50)]));
    EXPECT_NEAR(sdf.query(0.5 * (a + b)).distance, expected, 1e-12);
}

TEST(Query, NearSurfaceAccuracyOnSphere) {
    const GradientSdf& sdf = sphere_grid();  // r=40, 1 mm voxels
    Rng rng(89);
    int ok = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
        dir.normalize();
        const Vec3 p = dir * (40.0 + rng.uniform(-5.0, 5.0));
        const double err = std::abs(sdf.query(p).distance - sphere_sdf(p, 40.0));
        if (err <= 0.5 * sdf.voxel_size) ++ok;
    }
    EXPECT_GE(ok, static_cast<int>(0.99 * n));
}

TEST(Query, GradientUnitAndContinuity) {
    const GradientSdf& sdf = sphere_grid();
    Rng rng(97);
    for (int i = 0; i < 500; ++i) {
        const Vec3 p(rng.uniform(-45, 45), rng.uniform(-45, 45), rng.uniform(-45, 45));
        const SdfSample s = sdf.query(p);
        ASSERT_NEAR(s.gradient.norm(), 1.0, 1e-6);
        Vec3 q = p;
        q[static_cast<int>(rng.index(3))] += sdf.voxel_size / 150.0;
        const double dd = std::abs(sdf.query(q).distance - s.distance);
        ASSERT_LE(dd, 2.0 * (q - p).norm());
    }
}

TEST(Query, MarchingAlongNegativeGradientDecreasesDistance) {
    const GradientSdf& sdf = sphere_grid();
    const double vs = sdf.voxel_size;
    int tested = 0;
    for (int k = 1; k + 1 < sdf.dims[2]; k += 3)
        for (int j = 1; j + 1 < sdf.dims[1]; j += 3)
            for (int i = 1; i + 1 < sdf.dims[0]; i += 3) {
                const std::size_t idx = sdf.index(i, j, k);
                const double d = sdf.distance[idx];
                if (std::abs(d) > 2.0 * vs) continue;
                const Vec3 c = sdf.voxel_center(i, j, k);
                const Vec3 g = sdf.stored_gradient(idx);
                // signed distance strictly decreases along -gradient
                const double marched = sdf.query(c - vs * g).distance;
                ASSERT_LT(marched, d);
                // |distance| decreases too when the step cannot overshoot
                if (std::abs(d) > 1.2 * vs)
                    ASSERT_LT(std::abs(sdf.query(c - std::copysign(vs, d) * g).distance),
                              std::abs(d));
                ++tested;
            }
    EXPECT_GT(tested, 500);
}

TEST(Query, DegenerateGradientFallsBackToFiniteDifference) {
    // a thin slab puts opposing face normals into one interpolation cell, so
    // the blended gradient cancels and the finite-difference fallback kicks in
    const TriangleMesh slab = make_box(100.0, 100.0, 1.0);
    const GradientSdf sdf = build_gradient_sdf(slab, 2.0, 6.0);
    Rng rng(111);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p(rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(-0.9, 0.9));
        const SdfSample s = sdf.query(p);
        ASSERT_NEAR(s.gradient.norm(), 1.0, 1e-6) << p.transpose();
        ASSERT_TRUE(std::isfinite(s.distance));
    }
}

TEST(Query, OutOfGridExtrapolation) {
    const GradientSdf& sdf = sphere_grid();
    const Vec3 far(500.0, -300.0, 250.0);
    const SdfSample s = sdf.query(far);
    EXPECT_FALSE(s.inside_grid);
    EXPECT_NEAR(s.gradient.norm(), 1.0, 1e-6);
    EXPECT_GT(s.distance, 300.0);
    // monotone growth along the outward ray
    const SdfSample s2 = sdf.query(far * 1.5);
    EXPECT_GT(s2.distance, s.distance);
}

TEST(Serialize, RoundTripIsBitExact) {
    const GradientSdf sdf = build_gradient_sdf(make_icosphere(15.0, 1), 3.0, 4.0);
    std::stringstream ss;
    serialize(sdf, ss);
    const GradientSdf back = deserialize(ss);
    ASSERT_EQ(back.dims, sdf.dims);
    EXPECT_EQ(back.voxel_size, sdf.voxel_size);
    EXPECT_EQ((back.origin - sdf.origin).norm(), 0.0);
    ASSERT_EQ(back.distance.size(), sdf.distance.size());
    for (std::size_t i = 0; i < sdf.distance.size(); ++i) {
        ASSERT_EQ(back.distance[i], sdf.distance[i]);
        ASSERT_EQ(back.gradient[3 * i], sdf.gradient[3 * i]);
        ASSERT_EQ(back.gradient[3 * i + 1], sdf.gradient[3 * i + 1]);
        ASSERT_EQ(back.gradient[3 * i + 2], sdf.gradient[3 * i + 2]);
    }
}

TEST(Serialize, FormatArithmetic) {
    GradientSdf g;
    g.dims = {2, 2, 2};
    g.origin = Vec3(1, 2, 3);
    g.voxel_size = 0.5;
    g.distance.assign(8, 1.0f);
    g.gradient.assign(24, 0.0f);
    for (int i = 0; i < 8; ++i) g.gradient[static_cast<std::size_t>(3 * i + 2)] = 1.0f;
    std::stringstream ss;
    serialize(g, ss);
    // header: magic 4 + version 4 + dims 12 + origin 24 + voxel 8 = 52
    EXPECT_EQ(ss.str().size(), 52u + 8u * 16u);
}

TEST(Serialize, ErrorContracts) {
    const GradientSdf sdf = build_gradient_sdf(make_icosphere(10.0, 0), 4.0, 4.0);
    std::stringstream ss;
    serialize(sdf, ss);
    const std::string bytes = ss.str();

    {
        std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
        EXPECT_THROW(deserialize(truncated), TruncatedStream);
    }
    {
        std::string bad = bytes;
        bad[0] = 'X';
        std::stringstream s(bad);
        EXPECT_THROW(deserialize(s), BadMagic);
    }
    {
        std::string bad = bytes;
        bad[4] = 9;  // version
        std::stringstream s(bad);
        EXPECT_THROW(deserialize(s), UnsupportedVersion);
    }
}
