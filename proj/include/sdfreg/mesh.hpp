// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "sdfreg/errors.hpp"
#include "sdfreg/geometry.hpp"

namespace sdfreg {

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    bool valid() const { return (min.array() <= max.array()).all(); }
    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    double diagonal() const { return extent().norm(); }

    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void expand(const Aabb& b) {
        min = min.cwiseMin(b.min);
        max = max.cwiseMax(b.max);
    }
    Aabb inflated(double pad) const {
        return {min - Vec3::Constant(pad), max + Vec3::Constant(pad)};
    }
    /// Scaled about the center, per-side factor (1 + s).
    Aabb scaled(double factor) const {
        const Vec3 c = center();
        const Vec3 h = 0.5 * factor * extent();
        return {c - h, c + h};
    }
    double dist_sq(const Vec3& p) const {
        const Vec3 d = (min - p).cwiseMax(p - max).cwiseMax(0.0);
        return d.squaredNorm();
    }
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

/// Indexed triangle mesh in millimeters. face_normals are unit outward
/// normals, refreshed by update_face_normals().
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> face_normals;

    double face_area(int f) const {
        const auto& t = faces[static_cast<std::size_t>(f)];
        return 0.5 * (vertices[t[1]] - vertices[t[0]])
                         .cross(vertices[t[2]] - vertices[t[0]])
                         .norm();
    }

    double total_area() const {
        double a = 0.0;
        for (int f = 0; f < static_cast<int>(faces.size()); ++f) a += face_area(f);
        return a;
    }

    Aabb bounds() const {
        Aabb b;
        for (const auto& v : vertices) b.expand(v);
        return b;
    }

    void update_face_normals() {
        face_normals.resize(faces.size());
        for (std::size_t f = 0; f < faces.size(); ++f) {
            const auto& t = faces[f];
            const Vec3 n = (vertices[t[1]] - vertices[t[0]])
                               .cross(vertices[t[2]] - vertices[t[0]]);
            const double len = n.norm();
            face_normals[f] = len > 0.0 ? Vec3(n / len) : Vec3(0, 0, 1);
        }
    }

    /// Drop zero-area and repeated-index faces; returns how many were removed.
    std::size_t remove_degenerate_faces(double min_area = 1e-12) {
        std::vector<std::array<int, 3>> kept;
        kept.reserve(faces.size());
        for (std::size_t f = 0; f < faces.size(); ++f) {
            const auto& t = faces[f];
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
            if (face_area(static_cast<int>(f)) < min_area) continue;
            kept.push_back(t);
        }
        const std::size_t dropped = faces.size() - kept.size();
        faces = std::move(kept);
        update_face_normals();
        return dropped;
    }

    /// True when every undirected edge borders exactly two faces.
    bool is_watertight() const {
        std::unordered_map<std::uint64_t, int> edge_count;
        edge_count.reserve(faces.size() * 3);
        for (const auto& t : faces) {
            for (int e = 0; e < 3; ++e) {
                const std::uint64_t a = static_cast<std::uint64_t>(std::min(t[e], t[(e + 1) % 3]));
                const std::uint64_t b = static_cast<std::uint64_t>(std::max(t[e], t[(e + 1) % 3]));
                ++edge_count[(a << 32) | b];
            }
        }
        for (const auto& [key, c] : edge_count)
            if (c != 2) return false;
        return !faces.empty();
    }
};

/// Which feature of a triangle carries the closest point.
enum class TriFeature : int { V0 = 0, V1 = 1, V2 = 2, E01 = 3, E12 = 4, E20 = 5, Face = 6 };

struct TriClosest {
    Vec3 point = Vec3::Zero();
    double dist_sq = std::numeric_limits<double>::infinity();
    TriFeature feature = TriFeature::Face;
};

/// Exact closest point on triangle (a, b, c) to p, with the Voronoi-region
/// feature classification (Ericson, Real-Time Collision Detection 5.1.5).
inline TriClosest closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                         const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {a, (p - a).squaredNorm(), TriFeature::V0};

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {b, (p - b).squaredNorm(), TriFeature::V1};

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        const Vec3 q = a + v * ab;
        return {q, (p - q).squaredNorm(), TriFeature::E01};
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {c, (p - c).squaredNorm(), TriFeature::V2};

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        const Vec3 q = a + w * ac;
        return {q, (p - q).squaredNorm(), TriFeature::E20};
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        const Vec3 q = b + w * (c - b);
        return {q, (p - q).squaredNorm(), TriFeature::E12};
    }

    const double denom = va + vb + vc;
    if (!(denom > 0.0)) return {a, (p - a).squaredNorm(), TriFeature::V0};  // degenerate
    const double v = vb / denom, w = vc / denom;
    const Vec3 q = a + ab * v + ac * w;
    return {q, (p - q).squaredNorm(), TriFeature::Face};
}

/// Angle-weighted pseudonormals for faces, edges and vertices, used to sign
/// point-to-mesh distances at whichever feature holds the closest point
/// (Baerentzen & Aanaes). Keeps its own unit face normals so a const mesh
/// with stale normals is still handled.
class PseudonormalTable {
public:
    explicit PseudonormalTable(const TriangleMesh& mesh) {
        face_normals_.resize(mesh.faces.size());
        vertex_.assign(mesh.vertices.size(), Vec3::Zero());
        edge_.reserve(mesh.faces.size() * 3);
        edge_count_.reserve(mesh.faces.size() * 3);

        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const auto& t = mesh.faces[f];
            const Vec3& a = mesh.vertices[t[0]];
            const Vec3& b = mesh.vertices[t[1]];
            const Vec3& c = mesh.vertices[t[2]];
            Vec3 n = (b - a).cross(c - a);
            const double len = n.norm();
            n = len > 0.0 ? Vec3(n / len) : Vec3(0, 0, 1);
            face_normals_[f] = n;

            const Vec3* v[3] = {&a, &b, &c};
            for (int i = 0; i < 3; ++i) {
                const Vec3 e0 = (*v[(i + 1) % 3] - *v[i]).normalized();
                const Vec3 e1 = (*v[(i + 2) % 3] - *v[i]).normalized();
                const double angle =
                    std::acos(std::clamp(e0.dot(e1), -1.0, 1.0));
                vertex_[t[i]] += angle * n;
            }
            for (int e = 0; e < 3; ++e) {
                const std::uint64_t k = edge_key(t[e], t[(e + 1) % 3]);
                auto [it, fresh] = edge_.try_emplace(k, Vec3::Zero());
                it->second += n;  // Eigen default-ctor does not zero; emplace explicitly
                ++edge_count_[k];
            }
        }
        watertight_ = !mesh.faces.empty();
        for (const auto& [k, c] : edge_count_)
            if (c != 2) watertight_ = false;
    }

    bool watertight() const { return watertight_; }

    const Vec3& face_normal(int f) const { return face_normals_[static_cast<std::size_t>(f)]; }

    /// Pseudonormal at the feature of face f that carries the closest point.
    Vec3 at(const TriangleMesh& mesh, int f, TriFeature feature) const {
        const auto& t = mesh.faces[static_cast<std::size_t>(f)];
        switch (feature) {
            case TriFeature::V0: return vertex_[t[0]];
            case TriFeature::V1: return vertex_[t[1]];
            case TriFeature::V2: return vertex_[t[2]];
            case TriFeature::E01: return edge_.at(edge_key(t[0], t[1]));
            case TriFeature::E12: return edge_.at(edge_key(t[1], t[2]));
            case TriFeature::E20: return edge_.at(edge_key(t[2], t[0]));
            case TriFeature::Face: return face_normals_[static_cast<std::size_t>(f)];
        }
        return face_normals_[static_cast<std::size_t>(f)];
    }

private:
    static std::uint64_t edge_key(int a, int b) {
        const std::uint64_t lo = static_cast<std::uint64_t>(std::min(a, b));
        const std::uint64_t hi = static_cast<std::uint64_t>(std::max(a, b));
        return (lo << 32) | hi;
    }

    std::vector<Vec3> face_normals_;
    std::vector<Vec3> vertex_;
    std::unordered_map<std::uint64_t, Vec3> edge_;
    std::unordered_map<std::uint64_t, int> edge_count_;
    bool watertight_ = false;
};

/// Bounding-volume hierarchy for exact nearest-triangle queries. Pruning is
/// strict (a box is skipped only when its lower bound exceeds the current
/// best), and ties on distance resolve to the smallest triangle index, so
/// closest() returns exactly what a full scan in index order returns.
class MeshBvh {
public:
    struct Hit {
        int tri = -1;
        Vec3 point = Vec3::Zero();
        double dist_sq = std::numeric_limits<double>::infinity();
        TriFeature feature = TriFeature::Face;
    };

    explicit MeshBvh(const TriangleMesh& mesh) : mesh_(&mesh) {
        const int n = static_cast<int>(mesh.faces.size());
        tri_order_.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) tri_order_[static_cast<std::size_t>(i)] = i;
        centroids_.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const auto& t = mesh.faces[static_cast<std::size_t>(i)];
            centroids_[static_cast<std::size_t>(i)] =
                (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
        }
        if (n > 0) build(0, n);
        centroids_.clear();
        centroids_.shrink_to_fit();
    }

    /// hint_tri, when valid, pre-seeds the search bound; spatially coherent
    /// query sequences (e.g. scanning a voxel grid) prune most of the tree.
    Hit closest(const Vec3& p, int hint_tri = -1) const {
        Hit best;
        if (nodes_.empty()) return best;
        if (hint_tri >= 0 && hint_tri < static_cast<int>(mesh_->faces.size()))
            consider(p, hint_tri, best);

        struct Entry {
            int node;
            double lb;
        };
        Entry stack[64];
        int top = 0;
        stack[top++] = {0, nodes_[0].box.dist_sq(p)};
        while (top > 0) {
            const Entry e = stack[--top];
            if (e.lb > best.dist_sq) continue;
            const Node& nd = nodes_[static_cast<std::size_t>(e.node)];
            if (nd.count > 0) {
                for (int i = 0; i < nd.count; ++i)
                    consider(p, tri_order_[static_cast<std::size_t>(nd.first + i)], best);
                continue;
            }
            const double dl = nodes_[static_cast<std::size_t>(nd.left)].box.dist_sq(p);
            const double dr = nodes_[static_cast<std::size_t>(nd.right)].box.dist_sq(p);
            // push the farther child first so the nearer one is explored next
            if (dl <= dr) {
                if (dr <= best.dist_sq) stack[top++] = {nd.right, dr};
                if (dl <= best.dist_sq) stack[top++] = {nd.left, dl};
            } else {
                if (dl <= best.dist_sq) stack[top++] = {nd.left, dl};
                if (dr <= best.dist_sq) stack[top++] = {nd.right, dr};
            }
        }
        return best;
    }

private:
    struct Node {
        Aabb box;
        int left = -1, right = -1;
        int first = 0, count = 0;  // leaf when count > 0
    };

    void consider(const Vec3& p, int tri, Hit& best) const {
        const auto& t = mesh_->faces[static_cast<std::size_t>(tri)];
        const TriClosest c = closest_point_triangle(p, mesh_->vertices[t[0]],
                                                    mesh_->vertices[t[1]],
                                                    mesh_->vertices[t[2]]);
        if (c.dist_sq < best.dist_sq || (c.dist_sq == best.dist_sq && tri < best.tri)) {
            best.tri = tri;
            best.point = c.point;
            best.dist_sq = c.dist_sq;
            best.feature = c.feature;
        }
    }

    Aabb range_bounds(int first, int last) const {
        Aabb b;
        for (int i = first; i < last; ++i) {
            const auto& t = mesh_->faces[static_cast<std::size_t>(tri_order_[static_cast<std::size_t>(i)])];
            b.expand(mesh_->vertices[t[0]]);
            b.expand(mesh_->vertices[t[1]]);
            b.expand(mesh_->vertices[t[2]]);
        }
        return b;
    }

    int build(int first, int last) {
        const int node_idx = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        nodes_[static_cast<std::size_t>(node_idx)].box = range_bounds(first, last);

        const int count = last - first;
        if (count <= kLeafSize) {
            nodes_[static_cast<std::size_t>(node_idx)].first = first;
            nodes_[static_cast<std::size_t>(node_idx)].count = count;
            return node_idx;
        }

        Aabb cb;
        for (int i = first; i < last; ++i)
            cb.expand(centroids_[static_cast<std::size_t>(tri_order_[static_cast<std::size_t>(i)])]);
        int axis = 0;
        cb.extent().maxCoeff(&axis);

        const int mid = first + count / 2;
        std::nth_element(tri_order_.begin() + first, tri_order_.begin() + mid,
                         tri_order_.begin() + last, [&](int ta, int tb) {
                             return centroids_[static_cast<std::size_t>(ta)][axis] <
                                    centroids_[static_cast<std::size_t>(tb)][axis];
                         });

        const int l = build(first, mid);
        const int r = build(mid, last);
        nodes_[static_cast<std::size_t>(node_idx)].left = l;
        nodes_[static_cast<std::size_t>(node_idx)].right = r;
        return node_idx;
    }

    static constexpr int kLeafSize = 8;
    const TriangleMesh* mesh_;
    std::vector<Node> nodes_;
    std::vector<int> tri_order_;
    std::vector<Vec3> centroids_;
};

}  // namespace sdfreg
