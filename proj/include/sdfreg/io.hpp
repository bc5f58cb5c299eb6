// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sdfreg/errors.hpp"
#include "sdfreg/geometry.hpp"
#include "sdfreg/mesh.hpp"
#include "sdfreg/metrics.hpp"
#include "sdfreg/registration.hpp"
#include "sdfreg/simulate.hpp"

namespace sdfreg {

inline constexpr std::string_view kVersionString = "sdfreg 0.1.0";
inline constexpr int kResultSchemaVersion = 1;

struct MeshLoadStats {
    std::size_t degenerate_faces_dropped = 0;
    std::size_t duplicate_vertices_welded = 0;
};

namespace detail {

inline std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline double parse_double(std::string_view tok, long line) {
    char* end = nullptr;
    const std::string s(tok);
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || end != s.c_str() + s.size() || !std::isfinite(v))
        throw ParseError("expected a number, got '" + s + "'", line);
    return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::vector<std::string_view> split_char(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view strip(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// -------------------------------------------------------------- OBJ reader

inline TriangleMesh parse_obj(const std::string& text) {
    TriangleMesh mesh;
    long line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line = strip(std::string_view(text).substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tok = split_ws(line);
        if (tok[0] == "v") {
            if (tok.size() < 4) throw ParseError("vertex needs 3 coordinates", line_no);
            mesh.vertices.emplace_back(parse_double(tok[1], line_no), parse_double(tok[2], line_no),
                                       parse_double(tok[3], line_no));
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw ParseError("face needs at least 3 vertices", line_no);
            std::vector<int> idx;
            for (std::size_t i = 1; i < tok.size(); ++i) {
                std::string_view ref = tok[i];
                const std::size_t slash = ref.find('/');
                if (slash != std::string_view::npos) ref = ref.substr(0, slash);
                const long v = std::lround(parse_double(ref, line_no));
                long resolved = v > 0 ? v - 1 : static_cast<long>(mesh.vertices.size()) + v;
                if (resolved < 0 || resolved >= static_cast<long>(mesh.vertices.size()))
                    throw ParseError("face vertex index out of range", line_no);
                idx.push_back(static_cast<int>(resolved));
            }
            for (std::size_t i = 2; i < idx.size(); ++i)
                mesh.faces.push_back({idx[0], idx[i - 1], idx[i]});
        }
    }
    return mesh;
}

// -------------------------------------------------------------- PLY reader

struct PlyProperty {
    std::string name;
    int size = 0;          // bytes per scalar
    bool is_float = false;
    bool is_signed = false;
    bool is_list = false;
    int count_size = 0;    // list count scalar size
    bool list_signed = false;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

inline int ply_type_size(std::string_view t, bool* is_float = nullptr) {
    if (is_float) *is_float = false;
    if (t == "char" || t == "int8" || t == "uchar" || t == "uint8") return 1;
    if (t == "short" || t == "int16" || t == "ushort" || t == "uint16") return 2;
    if (t == "int" || t == "int32" || t == "uint" || t == "uint32") return 4;
    if (t == "float" || t == "float32") {
        if (is_float) *is_float = true;
        return 4;
    }
    if (t == "double" || t == "float64") {
        if (is_float) *is_float = true;
        return 8;
    }
    return 0;
}

inline bool ply_type_signed(std::string_view t) {
    return t == "char" || t == "int8" || t == "short" || t == "int16" || t == "int" ||
           t == "int32";
}

struct PlyFile {
    bool binary = false;
    std::vector<PlyElement> elements;
    std::size_t data_offset = 0;
};

inline PlyFile parse_ply_header(const std::string& text) {
    PlyFile ply;
    std::size_t pos = 0;
    long line_no = 0;
    bool saw_format = false, done = false;
    auto next_line = [&]() -> std::string_view {
        if (pos >= text.size()) throw ParseError("unterminated PLY header", line_no, static_cast<long>(pos));
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line = std::string_view(text).substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        return line;
    };

    if (strip(next_line()) != "ply") throw ParseError("missing 'ply' magic", 1);
    while (!done) {
        const auto tok = split_ws(next_line());
        if (tok.empty()) continue;
        if (tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "format") {
            if (tok.size() < 2) throw ParseError("bad format line", line_no);
            if (tok[1] == "ascii")
                ply.binary = false;
            else if (tok[1] == "binary_little_endian")
                ply.binary = true;
            else
                throw UnsupportedFormat("unsupported PLY format: " + std::string(tok[1]));
            saw_format = true;
        } else if (tok[0] == "element") {
            if (tok.size() < 3) throw ParseError("bad element line", line_no);
            PlyElement e;
            e.name = std::string(tok[1]);
            e.count = static_cast<std::size_t>(std::lround(parse_double(tok[2], line_no)));
            ply.elements.push_back(e);
        } else if (tok[0] == "property") {
            if (ply.elements.empty() || tok.size() < 3)
                throw ParseError("property before element", line_no);
            PlyProperty p;
            if (tok[1] == "list") {
                if (tok.size() < 5) throw ParseError("bad list property", line_no);
                p.is_list = true;
                p.count_size = ply_type_size(tok[2]);
                p.size = ply_type_size(tok[3]);
                p.list_signed = ply_type_signed(tok[3]);
                p.name = std::string(tok[4]);
                if (p.count_size == 0 || p.size == 0)
                    throw ParseError("unknown PLY list type", line_no);
            } else {
                p.size = ply_type_size(tok[1], &p.is_float);
                p.is_signed = ply_type_signed(tok[1]);
                p.name = std::string(tok[2]);
                if (p.size == 0) throw ParseError("unknown PLY type", line_no);
            }
            ply.elements.back().props.push_back(p);
        } else if (tok[0] == "end_header") {
            done = true;
        } else {
            throw ParseError("unexpected PLY header line", line_no);
        }
    }
    if (!saw_format) throw ParseError("PLY header missing format", line_no);
    ply.data_offset = pos;
    return ply;
}

inline double ply_read_scalar(const std::string& text, std::size_t& off, int size, bool is_float,
                              bool is_signed) {
    if (off + static_cast<std::size_t>(size) > text.size())
        throw ParseError("truncated PLY payload", -1, static_cast<long>(off));
    const char* p = text.data() + off;
    off += static_cast<std::size_t>(size);
    if (is_float) {
        if (size == 4) {
            float f;
            std::memcpy(&f, p, 4);
            return f;
        }
        double d;
        std::memcpy(&d, p, 8);
        return d;
    }
    std::int64_t v = 0;
    std::memcpy(&v, p, static_cast<std::size_t>(size));
    if (is_signed) {
        // sign-extend
        const int shift = 64 - 8 * size;
        v = (v << shift) >> shift;
    } else {
        const std::uint64_t mask = size == 8 ? ~0ull : ((1ull << (8 * size)) - 1);
        v = static_cast<std::int64_t>(static_cast<std::uint64_t>(v) & mask);
    }
    return static_cast<double>(v);
}

/// Reads vertices, optional faces, optional integer per-vertex "label".
inline void parse_ply(const std::string& text, std::vector<Vec3>& vertices,
                      std::vector<std::array<int, 3>>* faces, std::vector<int>* labels) {
    const PlyFile ply = parse_ply_header(text);
    std::size_t off = ply.data_offset;

    // token stream for the ascii flavor
    std::vector<std::string_view> ascii_tok;
    std::size_t tok_pos = 0;
    if (!ply.binary) {
        ascii_tok = split_ws(std::string_view(text).substr(off));
    }
    auto next_ascii = [&]() -> std::string_view {
        if (tok_pos >= ascii_tok.size())
            throw ParseError("truncated PLY payload", -1, static_cast<long>(text.size()));
        return ascii_tok[tok_pos++];
    };

    for (const PlyElement& el : ply.elements) {
        const bool is_vertex = el.name == "vertex";
        const bool is_face = el.name == "face" && faces != nullptr;
        int xi = -1, yi = -1, zi = -1, li = -1;
        for (std::size_t p = 0; p < el.props.size(); ++p) {
            if (el.props[p].name == "x") xi = static_cast<int>(p);
            if (el.props[p].name == "y") yi = static_cast<int>(p);
            if (el.props[p].name == "z") zi = static_cast<int>(p);
            if (el.props[p].name == "label") li = static_cast<int>(p);
        }
        if (is_vertex && (xi < 0 || yi < 0 || zi < 0))
            throw ParseError("PLY vertex element lacks x/y/z");

        for (std::size_t r = 0; r < el.count; ++r) {
            Vec3 v = Vec3::Zero();
            int label = 0;
            std::vector<int> poly;
            for (std::size_t p = 0; p < el.props.size(); ++p) {
                const PlyProperty& prop = el.props[p];
                if (prop.is_list) {
                    std::size_t n;
                    if (ply.binary)
                        n = static_cast<std::size_t>(
                            ply_read_scalar(text, off, prop.count_size, false, false));
                    else
                        n = static_cast<std::size_t>(std::lround(parse_double(next_ascii(), -1)));
                    if (n > 1024) throw ParseError("unreasonable PLY list length");
                    for (std::size_t i = 0; i < n; ++i) {
                        double val;
                        if (ply.binary)
                            val = ply_read_scalar(text, off, prop.size, false, prop.list_signed);
                        else
                            val = parse_double(next_ascii(), -1);
                        if (is_face && (prop.name == "vertex_indices" || prop.name == "vertex_index"))
                            poly.push_back(static_cast<int>(std::lround(val)));
                    }
                } else {
                    double val;
                    if (ply.binary)
                        val = ply_read_scalar(text, off, prop.size, prop.is_float, prop.is_signed);
                    else
                        val = parse_double(next_ascii(), -1);
                    if (is_vertex) {
                        if (static_cast<int>(p) == xi) v.x() = val;
                        if (static_cast<int>(p) == yi) v.y() = val;
                        if (static_cast<int>(p) == zi) v.z() = val;
                        if (static_cast<int>(p) == li) label = static_cast<int>(std::lround(val));
                    }
                }
            }
            if (is_vertex) {
                vertices.push_back(v);
                if (labels && li >= 0) labels->push_back(label);
            }
            if (is_face && !poly.empty()) {
                if (poly.size() < 3) throw ParseError("PLY face with fewer than 3 vertices");
                for (std::size_t i = 2; i < poly.size(); ++i)
                    faces->push_back({poly[0], poly[i - 1], poly[i]});
            }
        }
    }
}

// -------------------------------------------------------------- STL reader

inline TriangleMesh parse_stl(const std::string& data, MeshLoadStats* stats) {
    TriangleMesh mesh;
    std::map<std::array<float, 3>, int> weld;
    auto add_vertex = [&](const std::array<float, 3>& c) {
        const auto it = weld.find(c);
        if (it != weld.end()) {
            if (stats) ++stats->duplicate_vertices_welded;
            return it->second;
        }
        const int idx = static_cast<int>(mesh.vertices.size());
        mesh.vertices.emplace_back(c[0], c[1], c[2]);
        weld.emplace(c, idx);
        return idx;
    };

    bool binary = false;
    if (data.size() >= 84) {
        std::uint32_t n;
        std::memcpy(&n, data.data() + 80, 4);
        if (data.size() == 84 + 50ull * n) binary = true;
    }

    if (binary) {
        std::uint32_t n;
        std::memcpy(&n, data.data() + 80, 4);
        std::size_t off = 84;
        for (std::uint32_t t = 0; t < n; ++t) {
            off += 12;  // skip the stored normal; recomputed from vertices
            std::array<int, 3> tri;
            for (int v = 0; v < 3; ++v) {
                std::array<float, 3> c;
                std::memcpy(c.data(), data.data() + off, 12);
                off += 12;
                tri[v] = add_vertex(c);
            }
            off += 2;  // attribute byte count
            mesh.faces.push_back(tri);
        }
    } else {
        if (data.compare(0, 5, "solid") != 0)
            throw ParseError("not a valid STL file (bad size for binary, no 'solid' header)");
        long line_no = 0;
        std::size_t pos = 0;
        std::vector<std::array<float, 3>> pending;
        while (pos < data.size()) {
            std::size_t eol = data.find('\n', pos);
            if (eol == std::string::npos) eol = data.size();
            const auto tok = split_ws(std::string_view(data).substr(pos, eol - pos));
            pos = eol + 1;
            ++line_no;
            if (tok.size() >= 4 && tok[0] == "vertex") {
                pending.push_back({static_cast<float>(parse_double(tok[1], line_no)),
                                   static_cast<float>(parse_double(tok[2], line_no)),
                                   static_cast<float>(parse_double(tok[3], line_no))});
                if (pending.size() == 3) {
                    mesh.faces.push_back(
                        {add_vertex(pending[0]), add_vertex(pending[1]), add_vertex(pending[2])});
                    pending.clear();
                }
            }
        }
        if (!pending.empty()) throw ParseError("ASCII STL ends mid-facet", line_no);
    }
    return mesh;
}

}  // namespace detail

/// Load a triangle mesh (OBJ, ASCII/binary PLY, binary/ASCII STL); units are
/// assumed to be millimeters. Degenerate faces are dropped and counted.
inline TriangleMesh load_mesh(const std::string& path, MeshLoadStats* stats = nullptr) {
    const std::string ext = detail::lower_ext(path);
    const std::string data = detail::read_file(path);
    TriangleMesh mesh;
    if (ext == "obj") {
        mesh = detail::parse_obj(data);
    } else if (ext == "ply") {
        detail::parse_ply(data, mesh.vertices, &mesh.faces, nullptr);
    } else if (ext == "stl") {
        mesh = detail::parse_stl(data, stats);
    } else {
        throw UnsupportedFormat("unsupported mesh format: ." + ext);
    }
    for (const auto& t : mesh.faces)
        for (int v : t)
            if (v < 0 || v >= static_cast<int>(mesh.vertices.size()))
                throw ParseError("face index out of range in " + path);
    mesh.update_face_normals();
    const std::size_t dropped = mesh.remove_degenerate_faces();
    if (stats) stats->degenerate_faces_dropped = dropped;
    return mesh;
}

inline void save_mesh(const TriangleMesh& mesh, const std::string& path) {
    const std::string ext = detail::lower_ext(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    if (ext == "obj") {
        for (const auto& v : mesh.vertices)
            out << "v " << detail::format_g17(v.x()) << ' ' << detail::format_g17(v.y()) << ' '
                << detail::format_g17(v.z()) << '\n';
        for (const auto& t : mesh.faces)
            out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    } else if (ext == "ply") {
        out << "ply\nformat binary_little_endian 1.0\n"
            << "element vertex " << mesh.vertices.size() << "\n"
            << "property float x\nproperty float y\nproperty float z\n"
            << "element face " << mesh.faces.size() << "\n"
            << "property list uchar int vertex_indices\nend_header\n";
        for (const auto& v : mesh.vertices) {
            const float c[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()),
                                static_cast<float>(v.z())};
            out.write(reinterpret_cast<const char*>(c), 12);
        }
        for (const auto& t : mesh.faces) {
            const unsigned char n = 3;
            out.write(reinterpret_cast<const char*>(&n), 1);
            const std::int32_t idx[3] = {t[0], t[1], t[2]};
            out.write(reinterpret_cast<const char*>(idx), 12);
        }
    } else {
        throw UnsupportedFormat("unsupported mesh output format: ." + ext);
    }
    if (!out) throw IoError("write failed: " + path);
}

/// Load points from CSV (x,y,z[,label], optional header) or PLY.
inline PointCloud load_points(const std::string& path) {
    const std::string ext = detail::lower_ext(path);
    const std::string data = detail::read_file(path);
    PointCloud cloud;
    if (ext == "csv") {
        long line_no = 0;
        std::size_t pos = 0;
        bool maybe_header = true;
        while (pos < data.size()) {
            std::size_t eol = data.find('\n', pos);
            if (eol == std::string::npos) eol = data.size();
            std::string_view line = detail::strip(std::string_view(data).substr(pos, eol - pos));
            pos = eol + 1;
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            if (maybe_header) {
                maybe_header = false;
                const bool alpha = std::any_of(line.begin(), line.end(), [](unsigned char c) {
                    return std::isalpha(c) && c != 'e' && c != 'E';
                });
                if (alpha) continue;
            }
            const auto cells = detail::split_char(line, ',');
            if (cells.size() != 3 && cells.size() != 4)
                throw ParseError("CSV row needs 3 or 4 fields", line_no);
            cloud.points.emplace_back(detail::parse_double(detail::strip(cells[0]), line_no),
                                      detail::parse_double(detail::strip(cells[1]), line_no),
                                      detail::parse_double(detail::strip(cells[2]), line_no));
            if (cells.size() == 4)
                cloud.labels.push_back(static_cast<int>(
                    std::lround(detail::parse_double(detail::strip(cells[3]), line_no))));
        }
        if (!cloud.labels.empty() && cloud.labels.size() != cloud.points.size())
            throw ParseError("CSV labels present on only some rows");
    } else if (ext == "ply") {
        detail::parse_ply(data, cloud.points, nullptr, &cloud.labels);
        if (!cloud.labels.empty() && cloud.labels.size() != cloud.points.size())
            cloud.labels.clear();
    } else {
        throw UnsupportedFormat("unsupported point format: ." + ext);
    }
    return cloud;
}

/// Save points to CSV (full f64 precision) or binary PLY (f32).
inline void save_points(const PointCloud& cloud, const std::string& path) {
    const std::string ext = detail::lower_ext(path);
    const bool with_labels = cloud.labels.size() == cloud.points.size() && !cloud.labels.empty();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    if (ext == "csv") {
        out << (with_labels ? "x,y,z,label\n" : "x,y,z\n");
        for (std::size_t i = 0; i < cloud.points.size(); ++i) {
            const Vec3& p = cloud.points[i];
            out << detail::format_g17(p.x()) << ',' << detail::format_g17(p.y()) << ','
                << detail::format_g17(p.z());
            if (with_labels) out << ',' << cloud.labels[i];
            out << '\n';
        }
    } else if (ext == "ply") {
        out << "ply\nformat binary_little_endian 1.0\n"
            << "element vertex " << cloud.points.size() << "\n"
            << "property float x\nproperty float y\nproperty float z\n";
        if (with_labels) out << "property int label\n";
        out << "end_header\n";
        for (std::size_t i = 0; i < cloud.points.size(); ++i) {
            const Vec3& p = cloud.points[i];
            const float c[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                                static_cast<float>(p.z())};
            out.write(reinterpret_cast<const char*>(c), 12);
            if (with_labels) {
                const std::int32_t l = cloud.labels[i];
                out.write(reinterpret_cast<const char*>(&l), 4);
            }
        }
    } else {
        throw UnsupportedFormat("unsupported point output format: ." + ext);
    }
    if (!out) throw IoError("write failed: " + path);
}

// ------------------------------------------------------------- JSON schema

inline nlohmann::json to_json(const RigidTransform& x) {
    std::vector<double> r(9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r[static_cast<std::size_t>(3 * i + j)] = x.rotation(i, j);
    return {{"rotation", r}, {"translation", {x.translation.x(), x.translation.y(), x.translation.z()}}};
}

inline RigidTransform transform_from_json(const nlohmann::json& j) {
    RigidTransform x;
    const auto r = j.at("rotation").get<std::vector<double>>();
    if (r.size() != 9) throw ParseError("transform rotation must have 9 entries");
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) x.rotation(i, c) = r[static_cast<std::size_t>(3 * i + c)];
    const auto t = j.at("translation").get<std::vector<double>>();
    if (t.size() != 3) throw ParseError("transform translation must have 3 entries");
    x.translation = Vec3(t[0], t[1], t[2]);
    return x;
}

inline nlohmann::json to_json(const RobustConfig& c) {
    return {{"cauchy_c", c.cauchy_c},
            {"weight_eps", c.weight_eps},
            {"outlier_delta", c.outlier_delta},
            {"max_irls_iters", c.max_irls_iters},
            {"max_gn_iters", c.max_gn_iters},
            {"gn_step_tol", c.gn_step_tol},
            {"lm_lambda0", c.lm_lambda0},
            {"auto_scale_c", c.auto_scale_c},
            {"max_outer_rounds", c.max_outer_rounds}};
}

inline RobustConfig config_from_json(const nlohmann::json& j) {
    RobustConfig c;
    c.cauchy_c = j.value("cauchy_c", c.cauchy_c);
    c.weight_eps = j.value("weight_eps", c.weight_eps);
    c.outlier_delta = j.value("outlier_delta", c.outlier_delta);
    c.max_irls_iters = j.value("max_irls_iters", c.max_irls_iters);
    c.max_gn_iters = j.value("max_gn_iters", c.max_gn_iters);
    c.gn_step_tol = j.value("gn_step_tol", c.gn_step_tol);
    c.lm_lambda0 = j.value("lm_lambda0", c.lm_lambda0);
    c.auto_scale_c = j.value("auto_scale_c", c.auto_scale_c);
    c.max_outer_rounds = j.value("max_outer_rounds", c.max_outer_rounds);
    return c;
}

inline nlohmann::json to_json(const ExperimentSpec& s) {
    return {{"seed", s.seed},
            {"n_strokes", s.n_strokes},
            {"points_per_stroke", s.points_per_stroke},
            {"stroke_spacing_mm", s.stroke_spacing_mm},
            {"rot_range_deg", s.rot_range_deg},
            {"trans_range_mm", s.trans_range_mm},
            {"noise_sigma_mm", {s.noise_sigma_mm.x(), s.noise_sigma_mm.y(), s.noise_sigma_mm.z()}},
            {"outlier_ratio", s.outlier_ratio},
            {"aabb_inflation", s.aabb_inflation}};
}

inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
    ExperimentSpec s;
    s.seed = j.value("seed", s.seed);
    s.n_strokes = j.value("n_strokes", s.n_strokes);
    s.points_per_stroke = j.value("points_per_stroke", s.points_per_stroke);
    s.stroke_spacing_mm = j.value("stroke_spacing_mm", s.stroke_spacing_mm);
    s.rot_range_deg = j.value("rot_range_deg", s.rot_range_deg);
    s.trans_range_mm = j.value("trans_range_mm", s.trans_range_mm);
    if (j.contains("noise_sigma_mm")) {
        const auto v = j.at("noise_sigma_mm");
        if (v.is_number()) {
            s.noise_sigma_mm = Vec3::Constant(v.get<double>());
        } else {
            const auto a = v.get<std::vector<double>>();
            if (a.size() != 3) throw ParseError("noise_sigma_mm must be a number or 3-array");
            s.noise_sigma_mm = Vec3(a[0], a[1], a[2]);
        }
    }
    s.outlier_ratio = j.value("outlier_ratio", s.outlier_ratio);
    s.aabb_inflation = j.value("aabb_inflation", s.aabb_inflation);
    return s;
}

inline nlohmann::json to_json(const EvalReport& r) {
    return {{"mae_rot_deg", r.mae_rot_deg},
            {"mae_trans_mm", r.mae_trans_mm},
            {"chamfer_mm", r.chamfer_mm},
            {"tre_mm", r.tre_mm},
            {"tre_mean_mm", r.tre_mean_mm},
            {"runtime_s", r.runtime_s}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.mae_rot_deg = j.value("mae_rot_deg", 0.0);
    r.mae_trans_mm = j.value("mae_trans_mm", 0.0);
    r.chamfer_mm = j.value("chamfer_mm", 0.0);
    if (j.contains("tre_mm")) r.tre_mm = j.at("tre_mm").get<std::vector<double>>();
    r.tre_mean_mm = j.value("tre_mean_mm", 0.0);
    r.runtime_s = j.value("runtime_s", 0.0);
    return r;
}

/// Single registration result document: transform, weights, inlier mask,
/// cost history, config echo, seed, optional metrics block.
inline void save_result(const RegistrationResult& result, const RobustConfig& config,
                        std::uint64_t seed, const EvalReport* report, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = kResultSchemaVersion;
    j["version"] = std::string(kVersionString);
    j["seed"] = seed;
    j["config"] = to_json(config);
    j["transform"] = to_json(result.transform);
    j["weights"] = result.weights;
    std::vector<int> mask(result.inlier_mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = result.inlier_mask[i] ? 1 : 0;
    j["inlier_mask"] = mask;
    j["discarded_rounds"] = result.discarded_rounds;
    j["cost_history"] = result.cost_history;
    j["irls_rounds"] = result.irls_rounds;
    j["elapsed_s"] = result.elapsed_seconds;
    if (report) j["metrics"] = to_json(*report);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

struct LoadedResult {
    RegistrationResult result;
    RobustConfig config;
    std::uint64_t seed = 0;
    std::optional<EvalReport> report;
};

inline LoadedResult load_result(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad result JSON: ") + e.what());
    }
    LoadedResult lr;
    if (j.value("schema_version", 0) != kResultSchemaVersion)
        throw UnsupportedVersion("unknown result schema_version");
    lr.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("config")) lr.config = config_from_json(j.at("config"));
    lr.result.transform = transform_from_json(j.at("transform"));
    lr.result.weights = j.value("weights", std::vector<double>{});
    if (j.contains("inlier_mask")) {
        for (int v : j.at("inlier_mask").get<std::vector<int>>())
            lr.result.inlier_mask.push_back(v != 0);
    }
    if (j.contains("discarded_rounds"))
        lr.result.discarded_rounds = j.at("discarded_rounds").get<std::vector<std::vector<int>>>();
    lr.result.cost_history = j.value("cost_history", std::vector<double>{});
    lr.result.irls_rounds = j.value("irls_rounds", 0);
    lr.result.elapsed_seconds = j.value("elapsed_s", 0.0);
    if (j.contains("metrics")) lr.report = report_from_json(j.at("metrics"));
    return lr;
}

/// Paired landmark rows: model x,y,z, probe x,y,z. Feeds umeyama_align.
inline std::pair<PointCloud, PointCloud> load_landmark_pairs(const std::string& path) {
    const std::string data = detail::read_file(path);
    PointCloud model, probe;
    long line_no = 0;
    std::size_t pos = 0;
    bool maybe_header = true;
    while (pos < data.size()) {
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) eol = data.size();
        std::string_view line = detail::strip(std::string_view(data).substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (maybe_header) {
            maybe_header = false;
            const bool alpha = std::any_of(line.begin(), line.end(), [](unsigned char c) {
                return std::isalpha(c) && c != 'e' && c != 'E';
            });
            if (alpha) continue;
        }
        const auto cells = detail::split_char(line, ',');
        if (cells.size() != 6) throw ParseError("landmark row needs 6 fields", line_no);
        double v[6];
        for (int i = 0; i < 6; ++i)
            v[i] = detail::parse_double(detail::strip(cells[static_cast<std::size_t>(i)]), line_no);
        model.points.emplace_back(v[0], v[1], v[2]);
        probe.points.emplace_back(v[3], v[4], v[5]);
    }
    return {model, probe};
}

inline void save_landmark_pairs(const PointCloud& model, const PointCloud& probe,
                                const std::string& path) {
    if (model.size() != probe.size()) throw CountMismatch("landmark pair counts differ");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "model_x,model_y,model_z,probe_x,probe_y,probe_z\n";
    for (std::size_t i = 0; i < model.size(); ++i) {
        const Vec3& m = model.points[i];
        const Vec3& p = probe.points[i];
        out << detail::format_g17(m.x()) << ',' << detail::format_g17(m.y()) << ','
            << detail::format_g17(m.z()) << ',' << detail::format_g17(p.x()) << ','
            << detail::format_g17(p.y()) << ',' << detail::format_g17(p.z()) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

/// Trial directory manifest: spec echo, ground truth, counts, file names.
struct TrialManifest {
    ExperimentSpec spec;
    RigidTransform gt_transform;
    std::size_t n_inliers = 0;
    std::size_t n_outliers = 0;
    std::string points_csv;
    std::string points_ply;
    std::string clean_ply;
    std::string landmarks_csv;
    std::string model_points_ply;
};

inline void save_manifest(const TrialManifest& m, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["version"] = std::string(kVersionString);
    j["spec"] = to_json(m.spec);
    j["gt_transform"] = to_json(m.gt_transform);
    j["n_inliers"] = m.n_inliers;
    j["n_outliers"] = m.n_outliers;
    j["files"] = {{"points_csv", m.points_csv},
                  {"points_ply", m.points_ply},
                  {"clean_ply", m.clean_ply},
                  {"landmarks_csv", m.landmarks_csv},
                  {"model_points_ply", m.model_points_ply}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline TrialManifest load_manifest(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad manifest JSON: ") + e.what());
    }
    TrialManifest m;
    m.spec = spec_from_json(j.at("spec"));
    m.gt_transform = transform_from_json(j.at("gt_transform"));
    m.n_inliers = j.value("n_inliers", std::size_t{0});
    m.n_outliers = j.value("n_outliers", std::size_t{0});
    const auto& f = j.at("files");
    m.points_csv = f.value("points_csv", "");
    m.points_ply = f.value("points_ply", "");
    m.clean_ply = f.value("clean_ply", "");
    m.landmarks_csv = f.value("landmarks_csv", "");
    m.model_points_ply = f.value("model_points_ply", "");
    return m;
}

}  // namespace sdfreg
