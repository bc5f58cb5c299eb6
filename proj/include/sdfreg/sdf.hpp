// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "sdfreg/errors.hpp"
#include "sdfreg/geometry.hpp"
#include "sdfreg/mesh.hpp"

namespace sdfreg {

/// Interpolated field sample: signed distance (mm) and unit gradient.
/// inside_grid is false when the query point fell outside the voxel-center
/// lattice and the extrapolation contract applied.
struct SdfSample {
    double distance = 0.0;
    Vec3 gradient = Vec3::UnitZ();
    bool inside_grid = true;
};

/// Voxel grid of signed distance plus a precomputed unit gradient per voxel.
/// Sign convention: negative inside the surface, positive outside, so stored
/// gradients point outward. origin is the center of voxel (0,0,0); records
/// are laid out x-fastest, then y, then z.
struct GradientSdf {
    Vec3 origin = Vec3::Zero();
    double voxel_size = 1.0;
    std::array<int, 3> dims = {0, 0, 0};
    std::vector<float> distance;   // nx*ny*nz
    std::vector<float> gradient;   // 3 floats per voxel, interleaved
    bool watertight = true;        // advisory build flag, not serialized

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
    }

    Vec3 voxel_center(int i, int j, int k) const {
        return origin + voxel_size * Vec3(i, j, k);
    }

    Vec3 stored_gradient(std::size_t idx) const {
        return Vec3(gradient[3 * idx], gradient[3 * idx + 1], gradient[3 * idx + 2]);
    }

    double grid_diagonal() const {
        return voxel_size * Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1).norm();
    }

    SdfSample query(const Vec3& p) const;

private:
    struct Cell {
        int i, j, k;
        double fx, fy, fz;
    };

    Cell locate(const Vec3& p) const {
        const Vec3 u = (p - origin) / voxel_size;
        Cell c;
        c.i = std::clamp(static_cast<int>(std::floor(u.x())), 0, dims[0] - 2);
        c.j = std::clamp(static_cast<int>(std::floor(u.y())), 0, dims[1] - 2);
        c.k = std::clamp(static_cast<int>(std::floor(u.z())), 0, dims[2] - 2);
        c.fx = u.x() - c.i;
        c.fy = u.y() - c.j;
        c.fz = u.z() - c.k;
        return c;
    }

    double interp_distance(const Cell& c) const {
        const std::size_t i000 = index(c.i, c.j, c.k);
        const std::size_t sx = 1, sy = static_cast<std::size_t>(dims[0]);
        const std::size_t sz = static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
        auto d = [&](std::size_t off) { return static_cast<double>(distance[i000 + off]); };
        const double c00 = d(0) * (1.0 - c.fx) + d(sx) * c.fx;
        const double c10 = d(sy) * (1.0 - c.fx) + d(sy + sx) * c.fx;
        const double c01 = d(sz) * (1.0 - c.fx) + d(sz + sx) * c.fx;
        const double c11 = d(sz + sy) * (1.0 - c.fx) + d(sz + sy + sx) * c.fx;
        const double c0 = c00 * (1.0 - c.fy) + c10 * c.fy;
        const double c1 = c01 * (1.0 - c.fy) + c11 * c.fy;
        return c0 * (1.0 - c.fz) + c1 * c.fz;
    }

    Vec3 interp_gradient_raw(const Cell& c) const {
        const std::size_t i000 = index(c.i, c.j, c.k);
        const std::size_t sx = 1, sy = static_cast<std::size_t>(dims[0]);
        const std::size_t sz = static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
        Vec3 g = Vec3::Zero();
        const double wx[2] = {1.0 - c.fx, c.fx};
        const double wy[2] = {1.0 - c.fy, c.fy};
        const double wz[2] = {1.0 - c.fz, c.fz};
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const double w = wx[dx] * wy[dy] * wz[dz];
                    if (w == 0.0) continue;
                    g += w * stored_gradient(i000 + dx * sx + dy * sy + dz * sz);
                }
        return g;
    }

    double interp_distance_at(const Vec3& p) const { return interp_distance(locate(p)); }

    Vec3 interp_gradient_unit(const Vec3& p, const Cell& c) const {
        Vec3 g = interp_gradient_raw(c);
        const double n = g.norm();
        // a collapsed interpolation (all weight on one voxel) must hand back
        // the stored gradient bit-exactly; its float norm is within 2e-7 of 1
        if (std::abs(n - 1.0) <= 2e-7) return g;
        if (n >= 1e-6) return g / n;
        // interpolated gradients cancelled out (opposing normals in one
        // cell); fall back to a central difference of the distance field
        const double h = voxel_size / 4.0;
        Vec3 fd;
        for (int a = 0; a < 3; ++a) {
            Vec3 lo = p, hi = p;
            lo[a] -= h;
            hi[a] += h;
            fd[a] = (interp_distance_at(hi) - interp_distance_at(lo)) / (2.0 * h);
        }
        const double fn = fd.norm();
        return fn >= 1e-12 ? Vec3(fd / fn) : Vec3::UnitZ();
    }
};

inline SdfSample GradientSdf::query(const Vec3& p) const {
    const Vec3 lattice_max = origin + voxel_size * Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1);
    const bool inside = (p.array() >= origin.array()).all() &&
                        (p.array() <= lattice_max.array()).all();
    if (inside) {
        const Cell c = locate(p);
        SdfSample s;
        s.distance = interp_distance(c);
        s.gradient = interp_gradient_unit(p, c);
        s.inside_grid = true;
        return s;
    }
    // extrapolate: project onto the lattice box, then walk back out along the
    // offset so the field keeps growing away from the grid
    const Vec3 q = p.cwiseMax(origin).cwiseMin(lattice_max);
    const Cell c = locate(q);
    const Vec3 offset = p - q;
    const double off_len = offset.norm();
    SdfSample s;
    s.distance = interp_distance(c) + off_len;
    const Vec3 gq = interp_gradient_unit(q, c);
    Vec3 g = 0.5 * (offset / off_len) + 0.5 * gq;
    const double gn = g.norm();
    s.gradient = gn >= 1e-12 ? Vec3(g / gn) : gq;
    s.inside_grid = false;
    return s;
}

/// Exact signed distance + gradient grid for a triangle mesh. The grid covers
/// the mesh bounding box inflated by `padding` on every side. Per voxel the
/// unsigned distance is the exact point-to-mesh distance (BVH result equals a
/// full triangle scan), signed by the angle-weighted pseudonormal at the
/// closest feature. Non-watertight meshes still build but the result carries
/// watertight = false since inside/outside is then unreliable.
inline GradientSdf build_gradient_sdf(const TriangleMesh& mesh, double voxel_size,
                                      double padding) {
    if (mesh.faces.empty() || mesh.vertices.empty())
        throw EmptyMesh("build_gradient_sdf: mesh has no faces");
    if (!(voxel_size > 0.0)) throw InvalidArgument("build_gradient_sdf: voxel_size must be > 0");
    if (!(padding >= 0.0)) throw InvalidArgument("build_gradient_sdf: padding must be >= 0");

    const Aabb box = mesh.bounds().inflated(padding);
    GradientSdf sdf;
    sdf.voxel_size = voxel_size;
    sdf.origin = box.min;
    for (int a = 0; a < 3; ++a)
        sdf.dims[a] = std::max(2, static_cast<int>(std::ceil(box.extent()[a] / voxel_size)) + 1);

    const std::size_t n = sdf.voxel_count();
    sdf.distance.resize(n);
    sdf.gradient.resize(3 * n);

    const MeshBvh bvh(mesh);
    const PseudonormalTable normals(mesh);
    sdf.watertight = normals.watertight();

    int hint = -1;
    std::size_t idx = 0;
    for (int k = 0; k < sdf.dims[2]; ++k) {
        for (int j = 0; j < sdf.dims[1]; ++j) {
            for (int i = 0; i < sdf.dims[0]; ++i, ++idx) {
                const Vec3 c = sdf.voxel_center(i, j, k);
                const MeshBvh::Hit hit = bvh.closest(c, hint);
                hint = hit.tri;
                const double dist = std::sqrt(hit.dist_sq);
                const Vec3 pn = normals.at(mesh, hit.tri, hit.feature);
                const double side = (c - hit.point).dot(pn);
                const double sd = side < 0.0 ? -dist : dist;
                sdf.distance[idx] = static_cast<float>(sd);
                Vec3 g;
                if (dist >= 1e-9) {
                    g = (c - hit.point) / sd;
                } else {
                    const double pl = pn.norm();
                    g = pl > 0.0 ? Vec3(pn / pl) : Vec3::UnitZ();
                }
                sdf.gradient[3 * idx] = static_cast<float>(g.x());
                sdf.gradient[3 * idx + 1] = static_cast<float>(g.y());
                sdf.gradient[3 * idx + 2] = static_cast<float>(g.z());
            }
        }
    }
    return sdf;
}

inline double query_distance(const GradientSdf& sdf, const Vec3& p) {
    return sdf.query(p).distance;
}

// ---------------------------------------------------------------------------
// Binary GSDF format, little-endian:
//   magic "GSDF" | version u32 | dims 3*u32 | origin 3*f64 | voxel_size f64 |
//   nx*ny*nz records of (distance f32, gradient 3*f32), x fastest.
// ---------------------------------------------------------------------------

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "GSDF serialization assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw TruncatedStream("GSDF stream ended early");
    return v;
}

}  // namespace detail

inline void serialize(const GradientSdf& sdf, std::ostream& out) {
    out.write("GSDF", 4);
    detail::write_raw<std::uint32_t>(out, 1);
    for (int a = 0; a < 3; ++a)
        detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(sdf.dims[a]));
    for (int a = 0; a < 3; ++a) detail::write_raw<double>(out, sdf.origin[a]);
    detail::write_raw<double>(out, sdf.voxel_size);
    const std::size_t n = sdf.voxel_count();
    for (std::size_t idx = 0; idx < n; ++idx) {
        detail::write_raw<float>(out, sdf.distance[idx]);
        out.write(reinterpret_cast<const char*>(&sdf.gradient[3 * idx]), 3 * sizeof(float));
    }
    if (!out) throw IoError("GSDF write failed");
}

inline GradientSdf deserialize(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in) throw TruncatedStream("GSDF stream ended early");
    if (std::memcmp(magic, "GSDF", 4) != 0) throw BadMagic("not a GSDF stream");
    const std::uint32_t version = detail::read_raw<std::uint32_t>(in);
    if (version != 1) throw UnsupportedVersion("GSDF version " + std::to_string(version));

    GradientSdf sdf;
    for (int a = 0; a < 3; ++a) {
        const std::uint32_t d = detail::read_raw<std::uint32_t>(in);
        if (d < 2 || d > (1u << 14))
            throw ParseError("GSDF dims out of range");
        sdf.dims[a] = static_cast<int>(d);
    }
    for (int a = 0; a < 3; ++a) sdf.origin[a] = detail::read_raw<double>(in);
    sdf.voxel_size = detail::read_raw<double>(in);
    if (!(sdf.voxel_size > 0.0)) throw ParseError("GSDF voxel_size must be positive");

    const std::size_t n = sdf.voxel_count();
    if (n > (1ull << 31)) throw ParseError("GSDF grid too large");
    sdf.distance.resize(n);
    sdf.gradient.resize(3 * n);
    for (std::size_t idx = 0; idx < n; ++idx) {
        sdf.distance[idx] = detail::read_raw<float>(in);
        in.read(reinterpret_cast<char*>(&sdf.gradient[3 * idx]), 3 * sizeof(float));
        if (!in) throw TruncatedStream("GSDF stream ended early");
    }
    return sdf;
}

}  // namespace sdfreg
