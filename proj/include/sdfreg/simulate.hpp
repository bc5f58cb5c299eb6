// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <unordered_map>
#include <vector>

#include "sdfreg/errors.hpp"
#include "sdfreg/geometry.hpp"
#include "sdfreg/mesh.hpp"
#include "sdfreg/rng.hpp"

namespace sdfreg {

/// Face-index subset of a mesh standing in for intra-operatively exposed
/// anatomy.
struct RegionMask {
    std::vector<int> faces;
};

/// One synthetic trial, fully determined by (mesh, mask, spec).
struct ExperimentSpec {
    std::uint64_t seed = 0;
    int n_strokes = 20;
    int points_per_stroke = 30;
    double stroke_spacing_mm = 2.0;
    double rot_range_deg = 45.0;
    double trans_range_mm = 1000.0;
    Vec3 noise_sigma_mm = Vec3::Zero();
    double outlier_ratio = 0.0;
    double aabb_inflation = 0.2;

    void validate() const {
        if (n_strokes < 1 || points_per_stroke < 1)
            throw InvalidArgument("ExperimentSpec: stroke counts must be >= 1");
        if (!(stroke_spacing_mm > 0.0))
            throw InvalidArgument("ExperimentSpec: stroke_spacing_mm must be > 0");
        if (rot_range_deg < 0.0 || trans_range_mm < 0.0)
            throw InvalidArgument("ExperimentSpec: ranges must be >= 0");
        if ((noise_sigma_mm.array() < 0.0).any())
            throw InvalidArgument("ExperimentSpec: noise_sigma_mm must be >= 0");
        if (!(outlier_ratio >= 0.0 && outlier_ratio < 1.0))
            throw InvalidArgument("ExperimentSpec: outlier_ratio must be in [0, 1)");
        if (aabb_inflation < 0.0)
            throw InvalidArgument("ExperimentSpec: aabb_inflation must be >= 0");
    }
};

struct SyntheticTrial {
    PointCloud clean_points;     // model frame, on the surface
    PointCloud noisy_points;     // measurement frame (gt^-1 applied), noised
    PointCloud outlier_points;   // measurement frame
    PointCloud combined;         // shuffled union; labels: 1 inlier, 0 outlier
    RigidTransform gt_transform; // maps measurement frame back onto the model
    PointCloud landmarks_model;  // 10 far-apart vertices, model frame
    PointCloud landmarks_moved;  // same landmarks, measurement frame (+ noise)
};

/// Faces whose three vertices all lie within `geodesic_radius` of
/// `center_vertex` along the edge graph.
inline RegionMask spherical_cap_mask(const TriangleMesh& mesh, int center_vertex,
                                     double geodesic_radius) {
    if (center_vertex < 0 || center_vertex >= static_cast<int>(mesh.vertices.size()))
        throw InvalidArgument("spherical_cap_mask: center vertex out of range");
    if (!(geodesic_radius > 0.0))
        throw InvalidArgument("spherical_cap_mask: radius must be > 0");

    std::vector<std::vector<std::pair<int, double>>> adj(mesh.vertices.size());
    for (const auto& t : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            const int a = t[e], b = t[(e + 1) % 3];
            const double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
            adj[static_cast<std::size_t>(a)].push_back({b, len});
            adj[static_cast<std::size_t>(b)].push_back({a, len});
        }
    }

    std::vector<double> dist(mesh.vertices.size(), std::numeric_limits<double>::infinity());
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    dist[static_cast<std::size_t>(center_vertex)] = 0.0;
    pq.push({0.0, center_vertex});
    while (!pq.empty()) {
        const auto [d, v] = pq.top();
        pq.pop();
        if (d > dist[static_cast<std::size_t>(v)] || d > geodesic_radius) continue;
        for (const auto& [u, len] : adj[static_cast<std::size_t>(v)]) {
            const double nd = d + len;
            if (nd < dist[static_cast<std::size_t>(u)]) {
                dist[static_cast<std::size_t>(u)] = nd;
                pq.push({nd, u});
            }
        }
    }

    RegionMask mask;
    for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
        const auto& t = mesh.faces[static_cast<std::size_t>(f)];
        if (dist[static_cast<std::size_t>(t[0])] <= geodesic_radius &&
            dist[static_cast<std::size_t>(t[1])] <= geodesic_radius &&
            dist[static_cast<std::size_t>(t[2])] <= geodesic_radius)
            mask.faces.push_back(f);
    }
    if (mask.faces.empty()) throw RegionTooSmall("spherical_cap_mask: no face fully inside radius");
    return mask;
}

/// Whole-mesh mask.
inline RegionMask full_mask(const TriangleMesh& mesh) {
    RegionMask mask;
    mask.faces.resize(mesh.faces.size());
    for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f)
        mask.faces[static_cast<std::size_t>(f)] = f;
    return mask;
}

namespace detail {

struct StrokeWalker {
    const TriangleMesh& mesh;
    const std::vector<char>& in_mask;
    const std::unordered_map<std::uint64_t, std::pair<int, int>>& edge_faces;

    int face = -1;
    Vec3 pos = Vec3::Zero();
    Vec3 dir = Vec3::Zero();

    static std::uint64_t edge_key(int a, int b) {
        const std::uint64_t lo = static_cast<std::uint64_t>(std::min(a, b));
        const std::uint64_t hi = static_cast<std::uint64_t>(std::max(a, b));
        return (lo << 32) | hi;
    }

    const Vec3& normal() const { return mesh.face_normals[static_cast<std::size_t>(face)]; }

    Vec3 centroid() const {
        const auto& t = mesh.faces[static_cast<std::size_t>(face)];
        return (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    }

    void rotate_dir_in_plane(double angle) {
        const Vec3 n = normal();
        dir = std::cos(angle) * dir + std::sin(angle) * n.cross(dir);
        dir -= n.dot(dir) * n;
        dir.normalize();
    }

    /// First boundary crossing along dir: returns (t, edge_id) or t = inf.
    std::pair<double, int> exit_edge() const {
        const auto& t = mesh.faces[static_cast<std::size_t>(face)];
        double best_t = std::numeric_limits<double>::infinity();
        int best_e = -1;
        for (int e = 0; e < 3; ++e) {
            const Vec3& a = mesh.vertices[t[e]];
            const Vec3& b = mesh.vertices[t[(e + 1) % 3]];
            // in-plane outward normal of this edge
            Vec3 m = (b - a).cross(normal());
            const double mn = m.norm();
            if (mn == 0.0) continue;
            m /= mn;
            if (m.dot(centroid() - a) > 0.0) m = -m;  // ensure outward
            const double v = m.dot(dir);
            if (v <= 1e-14) continue;  // moving parallel or inward
            const double te = m.dot(a - pos) / v;
            if (te > 1e-12 && te < best_t) {
                best_t = te;
                best_e = e;
            }
        }
        return {best_t, best_e};
    }

    /// Cross the given edge into the neighbor if it is masked; otherwise
    /// reflect off the edge and stay. Returns false when stuck on a border
    /// with no usable direction.
    bool cross(int e) {
        const auto& t = mesh.faces[static_cast<std::size_t>(face)];
        const int va = t[e], vb = t[(e + 1) % 3];
        const Vec3 a = mesh.vertices[va];
        const Vec3 b = mesh.vertices[vb];
        Vec3 axis = b - a;
        const double alen = axis.norm();
        if (alen == 0.0) return false;
        axis /= alen;

        int neighbor = -1;
        const auto it = edge_faces.find(edge_key(va, vb));
        if (it != edge_faces.end()) {
            const auto [f0, f1] = it->second;
            neighbor = (f0 == face) ? f1 : f0;
            if (neighbor >= 0 && !in_mask[static_cast<std::size_t>(neighbor)]) neighbor = -1;
        }

        if (neighbor < 0) {
            // reflect across the edge line, keep walking in this face
            dir = 2.0 * dir.dot(axis) * axis - dir;
            dir -= normal().dot(dir) * normal();
            dir.normalize();
        } else {
            const Vec3 n_from = normal();
            face = neighbor;
            const Vec3 n_to = normal();
            const double ang = std::atan2(n_from.cross(n_to).dot(axis), n_from.dot(n_to));
            const Vec3 d = dir;
            dir = std::cos(ang) * d + std::sin(ang) * axis.cross(d) +
                  (1.0 - std::cos(ang)) * axis.dot(d) * axis;
            dir -= n_to.dot(dir) * n_to;
            const double dn = dir.norm();
            if (dn < 1e-12) return false;
            dir /= dn;
            // re-seat the position on the new face plane
            pos -= n_to.dot(pos - mesh.vertices[mesh.faces[static_cast<std::size_t>(face)][0]]) * n_to;
        }
        // nudge off the edge so the next exit test cannot re-hit it at t ~ 0
        pos += 1e-9 * (centroid() - pos);
        return true;
    }
};

}  // namespace detail

/// Curved probe strokes on the masked region: each stroke starts at a seeded
/// random point, walks across edge-adjacent masked faces with a randomly
/// drifting heading, and emits points every `spacing` of arc length. All
/// points lie on mesh triangles; fixed seeds reproduce the cloud exactly.
inline PointCloud sample_probe_strokes(const TriangleMesh& mesh, const RegionMask& mask,
                                       int n_strokes, int points_per_stroke, double spacing,
                                       std::uint64_t seed) {
    if (mask.faces.empty()) throw RegionTooSmall("sample_probe_strokes: empty mask");
    if (n_strokes < 1 || points_per_stroke < 1)
        throw InvalidArgument("sample_probe_strokes: counts must be >= 1");
    if (!(spacing > 0.0)) throw InvalidArgument("sample_probe_strokes: spacing must be > 0");
    for (int f : mask.faces)
        if (f < 0 || f >= static_cast<int>(mesh.faces.size()))
            throw InvalidArgument("sample_probe_strokes: mask face index out of range");
    if (mesh.face_normals.size() != mesh.faces.size())
        throw InvalidArgument("sample_probe_strokes: mesh face normals missing");

    double area = 0.0;
    for (int f : mask.faces) area += mesh.face_area(f);
    const double needed = static_cast<double>(n_strokes) * points_per_stroke * spacing * spacing;
    if (area < needed)
        throw RegionTooSmall("sample_probe_strokes: mask area " + std::to_string(area) +
                             " mm^2 < required " + std::to_string(needed) + " mm^2");

    std::vector<char> in_mask(mesh.faces.size(), 0);
    for (int f : mask.faces) in_mask[static_cast<std::size_t>(f)] = 1;

    std::unordered_map<std::uint64_t, std::pair<int, int>> edge_faces;
    edge_faces.reserve(mesh.faces.size() * 3);
    for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
        const auto& t = mesh.faces[static_cast<std::size_t>(f)];
        for (int e = 0; e < 3; ++e) {
            const std::uint64_t k = detail::StrokeWalker::edge_key(t[e], t[(e + 1) % 3]);
            auto [it, fresh] = edge_faces.emplace(k, std::pair<int, int>{f, -1});
            if (!fresh) it->second.second = f;
        }
    }

    Rng rng(seed);
    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(n_strokes) * points_per_stroke);

    for (int s = 0; s < n_strokes; ++s) {
        std::vector<Vec3> stroke;
        for (int attempt = 0; attempt < 16 && static_cast<int>(stroke.size()) < points_per_stroke;
             ++attempt) {
            stroke.clear();
            detail::StrokeWalker walker{mesh, in_mask, edge_faces};
            walker.face = mask.faces[rng.index(mask.faces.size())];
            const auto& t = mesh.faces[static_cast<std::size_t>(walker.face)];
            const double r1 = std::sqrt(rng.uniform());
            const double r2 = rng.uniform();
            walker.pos = (1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                         r1 * r2 * mesh.vertices[t[2]];

            const Vec3 n = walker.normal();
            Vec3 u = (std::abs(n.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).cross(n).normalized();
            const Vec3 v = n.cross(u);
            const double theta = rng.uniform(0.0, 2.0 * kPi);
            walker.dir = std::cos(theta) * u + std::sin(theta) * v;

            stroke.push_back(walker.pos);
            double remaining = spacing;
            int crossings = 0;
            while (static_cast<int>(stroke.size()) < points_per_stroke && crossings < 2000) {
                const auto [te, edge] = walker.exit_edge();
                if (edge < 0) {  // numerically stuck; pick a fresh heading
                    walker.rotate_dir_in_plane(rng.uniform(0.0, 2.0 * kPi));
                    ++crossings;
                    continue;
                }
                if (te >= remaining) {
                    walker.pos += remaining * walker.dir;
                    stroke.push_back(walker.pos);
                    remaining = spacing;
                    walker.rotate_dir_in_plane(rng.uniform(-0.35, 0.35));
                } else {
                    walker.pos += te * walker.dir;
                    remaining -= te;
                    if (!walker.cross(edge)) break;
                    ++crossings;
                }
            }
        }
        if (static_cast<int>(stroke.size()) < points_per_stroke)
            throw RegionTooSmall("sample_probe_strokes: stroke walk could not progress");
        cloud.points.insert(cloud.points.end(), stroke.begin(), stroke.end());
    }
    return cloud;
}

/// Uniform per-axis Euler angles in [-rot_range, +rot_range] degrees composed
/// Z-Y-X, translation components uniform in [-trans_range, +trans_range] mm.
/// Draw order: rx, ry, rz, tx, ty, tz.
inline RigidTransform random_rigid_transform(double rot_range_deg, double trans_range_mm,
                                             std::uint64_t seed) {
    if (rot_range_deg < 0.0 || trans_range_mm < 0.0)
        throw InvalidArgument("random_rigid_transform: ranges must be >= 0");
    Rng rng(seed);
    const double rx = rng.uniform(-rot_range_deg, rot_range_deg);
    const double ry = rng.uniform(-rot_range_deg, rot_range_deg);
    const double rz = rng.uniform(-rot_range_deg, rot_range_deg);
    RigidTransform x;
    x.rotation = rotation_from_euler_zyx(rx, ry, rz);
    for (int a = 0; a < 3; ++a) x.translation[a] = rng.uniform(-trans_range_mm, trans_range_mm);
    return x;
}

/// Independent zero-mean Gaussian offset per axis; axis k uses sigma[k].
inline PointCloud add_gaussian_noise(const PointCloud& cloud, const Vec3& sigma,
                                     std::uint64_t seed) {
    if ((sigma.array() < 0.0).any())
        throw InvalidArgument("add_gaussian_noise: sigma must be >= 0");
    Rng rng(seed);
    PointCloud out = cloud;
    for (auto& p : out.points)
        for (int a = 0; a < 3; ++a) p[a] += sigma[a] * rng.gaussian();
    return out;
}

/// Draws round(ratio * N_in / (1 - ratio)) outliers uniformly in `mesh_aabb`
/// scaled by (1 + inflation) per side, and returns the shuffled union with
/// labels (1 inlier, 0 outlier).
inline PointCloud inject_outliers(const PointCloud& points, const Aabb& mesh_aabb, double ratio,
                                  double inflation, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio < 1.0))
        throw InvalidArgument("inject_outliers: ratio must be in [0, 1)");
    if (inflation < 0.0) throw InvalidArgument("inject_outliers: inflation must be >= 0");
    if (!mesh_aabb.valid()) throw InvalidArgument("inject_outliers: invalid AABB");

    Rng rng(seed);
    const double n_in = static_cast<double>(points.size());
    const std::size_t n_out =
        static_cast<std::size_t>(std::llround(ratio * n_in / (1.0 - ratio)));
    const Aabb box = mesh_aabb.scaled(1.0 + inflation);

    PointCloud out;
    out.points = points.points;
    out.labels.assign(points.size(), 1);
    for (std::size_t i = 0; i < n_out; ++i) {
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = rng.uniform(box.min[a], box.max[a]);
        out.points.push_back(p);
        out.labels.push_back(0);
    }
    // Fisher-Yates
    for (std::size_t i = out.points.size(); i > 1; --i) {
        const std::size_t j = rng.index(i);
        std::swap(out.points[i - 1], out.points[j]);
        std::swap(out.labels[i - 1], out.labels[j]);
    }
    return out;
}

/// Greedy farthest-point sampling over mesh vertices (Euclidean), seeded start.
inline std::vector<int> farthest_point_sample(const TriangleMesh& mesh, int count,
                                              std::uint64_t seed) {
    const int nv = static_cast<int>(mesh.vertices.size());
    if (count < 1 || count > nv) throw InvalidArgument("farthest_point_sample: bad count");
    Rng rng(seed);
    std::vector<int> picked;
    picked.reserve(static_cast<std::size_t>(count));
    std::vector<double> best(static_cast<std::size_t>(nv),
                             std::numeric_limits<double>::infinity());
    int cur = static_cast<int>(rng.index(static_cast<std::uint64_t>(nv)));
    picked.push_back(cur);
    for (int k = 1; k < count; ++k) {
        int far_idx = 0;
        double far_d = -1.0;
        for (int v = 0; v < nv; ++v) {
            const double d =
                (mesh.vertices[static_cast<std::size_t>(v)] - mesh.vertices[static_cast<std::size_t>(cur)])
                    .squaredNorm();
            best[static_cast<std::size_t>(v)] = std::min(best[static_cast<std::size_t>(v)], d);
            if (best[static_cast<std::size_t>(v)] > far_d) {
                far_d = best[static_cast<std::size_t>(v)];
                far_idx = v;
            }
        }
        picked.push_back(far_idx);
        cur = far_idx;
    }
    return picked;
}

/// Area-weighted uniform surface samples, e.g. for a dense model cloud.
inline PointCloud sample_mesh_surface(const TriangleMesh& mesh, int count, std::uint64_t seed) {
    if (mesh.faces.empty()) throw EmptyMesh("sample_mesh_surface: mesh has no faces");
    if (count < 1) throw InvalidArgument("sample_mesh_surface: count must be >= 1");
    std::vector<double> cum(mesh.faces.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        acc += mesh.face_area(static_cast<int>(f));
        cum[f] = acc;
    }
    Rng rng(seed);
    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double u = rng.uniform(0.0, acc);
        const std::size_t f = static_cast<std::size_t>(
            std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        const auto& t = mesh.faces[std::min(f, mesh.faces.size() - 1)];
        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        cloud.points.push_back((1.0 - r1) * mesh.vertices[t[0]] +
                               r1 * (1.0 - r2) * mesh.vertices[t[1]] + r1 * r2 * mesh.vertices[t[2]]);
    }
    return cloud;
}

/// Full synthetic protocol: strokes on the masked region -> move the cloud by
/// gt^-1 (the model and its SDF stay fixed; registration must recover gt) ->
/// per-axis Gaussian noise -> uniform outliers in the moved, inflated mesh
/// AABB. Ten farthest-point landmarks are emitted in both frames; the moved
/// copies carry the same noise level as the probe points.
inline SyntheticTrial make_trial(const TriangleMesh& mesh, const RegionMask& mask,
                                 const ExperimentSpec& spec) {
    spec.validate();
    SyntheticTrial trial;
    trial.clean_points =
        sample_probe_strokes(mesh, mask, spec.n_strokes, spec.points_per_stroke,
                             spec.stroke_spacing_mm, Rng::derive(spec.seed, 1));
    trial.gt_transform =
        random_rigid_transform(spec.rot_range_deg, spec.trans_range_mm, Rng::derive(spec.seed, 2));
    const RigidTransform inv = trial.gt_transform.inverse();

    PointCloud moved;
    moved.points.reserve(trial.clean_points.size());
    for (const Vec3& p : trial.clean_points.points) moved.points.push_back(inv * p);
    trial.noisy_points = add_gaussian_noise(moved, spec.noise_sigma_mm, Rng::derive(spec.seed, 3));

    Aabb moved_box;
    for (const Vec3& v : mesh.vertices) moved_box.expand(inv * v);
    trial.combined = inject_outliers(trial.noisy_points, moved_box, spec.outlier_ratio,
                                     spec.aabb_inflation, Rng::derive(spec.seed, 4));
    for (std::size_t i = 0; i < trial.combined.size(); ++i)
        if (trial.combined.labels[i] == 0)
            trial.outlier_points.points.push_back(trial.combined.points[i]);

    const std::vector<int> lm = farthest_point_sample(mesh, 10, Rng::derive(spec.seed, 5));
    PointCloud lm_moved;
    for (int v : lm) {
        trial.landmarks_model.points.push_back(mesh.vertices[static_cast<std::size_t>(v)]);
        lm_moved.points.push_back(inv * mesh.vertices[static_cast<std::size_t>(v)]);
    }
    trial.landmarks_moved =
        add_gaussian_noise(lm_moved, spec.noise_sigma_mm, Rng::derive(spec.seed, 6));
    return trial;
}

}  // namespace sdfreg
