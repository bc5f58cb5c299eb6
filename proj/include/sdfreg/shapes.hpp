// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "sdfreg/errors.hpp"
#include "sdfreg/mesh.hpp"

namespace sdfreg {

/// Unit icosahedron subdivided `subdivisions` times, vertices projected to
/// `radius`. 20 * 4^s faces, watertight, outward orientation.
inline TriangleMesh make_icosphere(double radius, int subdivisions) {
    if (!(radius > 0.0)) throw InvalidArgument("make_icosphere: radius must be positive");
    if (subdivisions < 0 || subdivisions > 7)
        throw InvalidArgument("make_icosphere: subdivisions out of range");

    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

    for (auto& v : verts) v.normalize();

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const Vec3 m = (verts[a] + verts[b]).normalized();
            verts.push_back(m);
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& t : faces) {
            const int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    TriangleMesh mesh;
    mesh.vertices.reserve(verts.size());
    for (const auto& v : verts) mesh.vertices.push_back(v * radius);
    mesh.faces = std::move(faces);
    mesh.update_face_normals();
    return mesh;
}

/// Axis-aligned box centered at the origin, 12 triangles, outward orientation.
inline TriangleMesh make_box(double sx, double sy, double sz) {
    if (!(sx > 0.0 && sy > 0.0 && sz > 0.0))
        throw InvalidArgument("make_box: sides must be positive");
    const double x = sx / 2.0, y = sy / 2.0, z = sz / 2.0;
    TriangleMesh mesh;
    mesh.vertices = {{-x, -y, -z}, {x, -y, -z}, {x, y, -z}, {-x, y, -z},
                     {-x, -y, z}, {x, -y, z}, {x, y, z}, {-x, y, z}};
    mesh.faces = {
        {0, 2, 1}, {0, 3, 2},  // -z
        {4, 5, 6}, {4, 6, 7},  // +z
        {0, 1, 5}, {0, 5, 4},  // -y
        {2, 3, 7}, {2, 7, 6},  // +y
        {1, 2, 6}, {1, 6, 5},  // +x
        {3, 0, 4}, {3, 4, 7},  // -x
    };
    mesh.update_face_normals();
    return mesh;
}

namespace detail {
inline double smoothstep(double lo, double hi, double x) {
    const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}
}  // namespace detail

/// Long-bone stand-in: a lathed tube along z with a bent centerline, a wide
/// asymmetric head at each end, and a slightly elliptical cross-section, so
/// the shape has no rotational or mirror symmetry. Watertight. Dimensions in
/// millimeters; overall extent is roughly `length` plus the end radii.
inline TriangleMesh make_bone(double length = 150.0, double shaft_radius = 12.0,
                              double head_radius = 22.0, double bend = 14.0,
                              int segments = 36, int rings = 72) {
    if (!(length > 0.0 && shaft_radius > 0.0 && head_radius >= shaft_radius))
        throw InvalidArgument("make_bone: bad dimensions");
    if (segments < 8 || rings < 8) throw InvalidArgument("make_bone: too coarse");

    const double half = length / 2.0;
    // radius profile along t in [0,1]: bulges at the ends, narrow shaft
    auto profile = [&](double t) {
        const double lo = detail::smoothstep(0.22, 0.04, t);        // proximal bulge
        const double hi = detail::smoothstep(0.78, 0.96, t);        // distal bulge
        const double r = shaft_radius + (head_radius - shaft_radius) * lo +
                         (0.78 * head_radius - shaft_radius) * hi;
        // taper to a rounded tip in the last few percent
        const double tip = std::min(detail::smoothstep(0.0, 0.035, t),
                                    detail::smoothstep(1.0, 0.965, t));
        return r * std::sqrt(std::max(tip, 1e-4));
    };
    auto center = [&](double t) {
        return Vec3(bend * std::sin(kPi * t) + 0.35 * bend * std::sin(2.0 * kPi * t),
                    0.25 * bend * std::sin(kPi * t),
                    -half + length * t);
    };

    TriangleMesh mesh;
    const int pole_lo = 0;
    mesh.vertices.push_back(center(0.0));
    for (int j = 1; j < rings; ++j) {
        const double t = static_cast<double>(j) / rings;
        const double r = profile(t);
        const Vec3 c = center(t);
        for (int i = 0; i < segments; ++i) {
            const double a = 2.0 * kPi * i / segments;
            mesh.vertices.push_back(c + Vec3(r * std::cos(a), 0.85 * r * std::sin(a), 0.0));
        }
    }
    const int pole_hi = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(center(1.0));

    auto ring_vert = [&](int j, int i) {  // j in [1, rings-1]
        return 1 + (j - 1) * segments + (i % segments);
    };
    for (int i = 0; i < segments; ++i)
        mesh.faces.push_back({pole_lo, ring_vert(1, i + 1), ring_vert(1, i)});
    for (int j = 1; j < rings - 1; ++j) {
        for (int i = 0; i < segments; ++i) {
            const int a = ring_vert(j, i), b = ring_vert(j, i + 1);
            const int c = ring_vert(j + 1, i), d = ring_vert(j + 1, i + 1);
            mesh.faces.push_back({a, b, d});
            mesh.faces.push_back({a, d, c});
        }
    }
    for (int i = 0; i < segments; ++i)
        mesh.faces.push_back({pole_hi, ring_vert(rings - 1, i), ring_vert(rings - 1, i + 1)});

    mesh.update_face_normals();
    return mesh;
}

}  // namespace sdfreg
